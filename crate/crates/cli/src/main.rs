use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_bigint::BigInt;
use serde::Serialize;
use serde_json::{json, Value};

use quadtower::domain::{self, DomainJson};
use quadtower::field::{ElementJson, TowerJson};
use quadtower::lattice::{self, CoverMode, LatticeInstance, LatticeJson, DEFAULT_NODE_BUDGET};
use quadtower::rational::{format_q, parse_q};
use quadtower::unramified::{self, SearchBudget, UnitBudget, WitnessSearch};
use quadtower::voronoi::{self, NumberField};
use quadtower::{Error, FieldElement, Interval, SubsetOrder, Tower};

#[derive(Parser)]
#[command(name = "quadtower", version, about = "Multiquadratic towers, fundamental domains and covering-radius bounds")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Args)]
struct Global {
    /// Working precision of certified numerics, in bits.
    #[arg(long, global = true, default_value_t = 256)]
    precision_bits: u32,
    /// Exponent bound of the unit search.
    #[arg(long, global = true, default_value_t = 3)]
    exponent_bound: u32,
    /// Largest vertex count enumerated for domain radii.
    #[arg(long, global = true, default_value_t = 1 << 20)]
    vertex_cap: u64,
    /// Node budget of lattice enumeration.
    #[arg(long, global = true, default_value_t = DEFAULT_NODE_BUDGET)]
    enum_nodes: u64,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Worker threads; defaults to the available cores.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Seed for grid refinement ordering; outputs do not depend on it.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Write the artifact here instead of stdout.
    #[arg(long, short = 'o', global = true)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Build and search two-step towers.
    #[command(subcommand)]
    Tower(TowerCmd),
    /// Certify that L(√w)/L is unramified at finite primes.
    #[command(subcommand)]
    Unramified(UnramifiedCmd),
    /// Fundamental domains of O_{N,ε}.
    #[command(subcommand)]
    Domain(DomainCmd),
    /// Covering radius and volume bound of a small field.
    #[command(subcommand)]
    Voronoi(VoronoiCmd),
    /// Cyclotomic root-discriminant scan.
    #[command(subcommand)]
    Cyclo(CycloCmd),
    /// Exact lattice algorithms.
    #[command(subcommand)]
    Lattice(LatticeCmd),
}

#[derive(Subcommand)]
enum TowerCmd {
    /// Validate primes and units and emit the tower.
    Build {
        #[arg(long, value_delimiter = ',', required = true)]
        primes: Vec<i64>,
        /// A unit of L as an expression, e.g. `-315+126*sqrt(5)-44*sqrt(41)+22*sqrt(205)`.
        #[arg(long = "unit", allow_hyphen_values = true)]
        units: Vec<String>,
        /// Units from a `tower search-units` artifact (path or inline JSON).
        #[arg(long)]
        units_from: Option<String>,
    },
    /// Search the unit group of L for admissible units w.
    SearchUnits {
        #[arg(long, value_delimiter = ',', required = true)]
        primes: Vec<i64>,
        #[arg(long, default_value_t = 2_000_000)]
        max_candidates: u64,
        /// Search only the subgroup generated by the quadratic subfield units.
        #[arg(long)]
        no_saturate: bool,
    },
}

#[derive(Subcommand)]
enum UnramifiedCmd {
    /// Check a witness β, or search for one when `--beta` is absent.
    Check {
        /// Base field as JSON, e.g. `{"level1":[-5]}`.
        #[arg(long)]
        field: String,
        #[arg(long, allow_hyphen_values = true)]
        w: String,
        #[arg(long, allow_hyphen_values = true)]
        beta: Option<String>,
        #[arg(long, default_value_t = 100_000)]
        max_candidates: u64,
        #[arg(long, default_value_t = 3)]
        height_bound: u32,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum OrderArg {
    Cardinality,
    Binary,
}

#[derive(Subcommand)]
enum DomainCmd {
    /// Compute the short generators h_T.
    Build {
        /// Tower JSON or a `tower build` artifact (path or inline JSON).
        #[arg(long)]
        tower: String,
        #[arg(long, value_enum, default_value_t = OrderArg::Cardinality)]
        subset_order: OrderArg,
        /// Explicit subset order as masks, overriding `--subset-order`.
        #[arg(long, value_delimiter = ',')]
        order: Option<Vec<u32>>,
    },
    /// Reduce a point of N into the domain.
    Reduce {
        #[arg(long)]
        domain: String,
        /// Expression over the tower, or an element JSON object.
        #[arg(long, allow_hyphen_values = true)]
        point: String,
    },
    /// Radii, index and exponent columns of a domain.
    Report {
        #[arg(long)]
        domain: String,
    },
}

#[derive(Subcommand)]
enum VoronoiCmd {
    /// Shortest vector, covering radius and volume inequality of a field.
    Field {
        /// `Q`, `Q(i)`, `Q(sqrt(5))`, `Q(zeta_5)`, or JSON.
        #[arg(long)]
        field: String,
    },
}

#[derive(Subcommand)]
enum CycloCmd {
    /// Test δ(Q(ζ_m)) ≥ φ(m)^{1−ε} over a range of m.
    Scan {
        #[arg(long, default_value_t = 1)]
        min_m: u64,
        #[arg(long)]
        max_m: u64,
        /// Exact rational, e.g. `0.1` or `1/10`.
        #[arg(long)]
        epsilon: String,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum NormArg {
    L2,
    Linf,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Exact,
    Bounds,
}

#[derive(Subcommand)]
enum LatticeCmd {
    Lll {
        /// `{"basis": [[…]]}` or `{"gram": [[…]]}` (path or inline JSON).
        #[arg(long)]
        lattice: String,
        #[arg(long, default_value = "99/100")]
        delta: String,
    },
    Svp {
        #[arg(long)]
        lattice: String,
        #[arg(long, value_enum, default_value_t = NormArg::L2)]
        norm: NormArg,
        /// L∞ search bound; defaults to the L² minimum.
        #[arg(long)]
        bound: Option<String>,
    },
    Cvp {
        #[arg(long)]
        lattice: String,
        /// Target coordinates (over the basis, or ambient with `--ambient`).
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        target: Vec<String>,
        #[arg(long)]
        ambient: bool,
    },
    Cover {
        #[arg(long)]
        lattice: String,
        #[arg(long, value_enum, default_value_t = ModeArg::Exact)]
        mode: ModeArg,
    },
}

struct Failure {
    exit: u8,
    code: String,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let exit = match &e {
            Error::Precision(_) | Error::Budget(_) => 3,
            Error::Parse(_) => 65,
            Error::Internal(_) => 70,
            _ => 2,
        };
        Failure { exit, code: e.code().to_string(), message: e.to_string() }
    }
}

fn malformed(msg: impl Into<String>) -> Failure {
    Failure { exit: 65, code: "malformed_input".into(), message: msg.into() }
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure { exit: 2, code: "validation".into(), message: msg.into() }
}

type Res<T> = std::result::Result<T, Failure>;

/// Inline JSON when the argument starts with `{` or `[`, otherwise a path.
fn read_json(arg: &str) -> Res<Value> {
    let text = if arg.trim_start().starts_with(['{', '[']) {
        arg.to_string()
    } else {
        fs::read_to_string(arg).map_err(|e| malformed(format!("cannot read {arg}: {e}")))?
    };
    serde_json::from_str(&text).map_err(|e| malformed(format!("malformed JSON in {arg}: {e}")))
}

fn from_value<T: serde::de::DeserializeOwned>(v: Value, what: &str) -> Res<T> {
    serde_json::from_value(v).map_err(|e| malformed(format!("malformed {what}: {e}")))
}

/// A tower from bare tower JSON or from an artifact carrying a `tower` key.
fn read_tower(arg: &str) -> Res<Tower> {
    let mut v = read_json(arg)?;
    if let Some(t) = v.get_mut("tower") {
        v = t.take();
    }
    Ok(Tower::from_json(&from_value::<TowerJson>(v, "tower")?)?)
}

fn parse_element(tower: &Tower, s: &str) -> Res<FieldElement> {
    if s.trim_start().starts_with('{') {
        let j: ElementJson = from_value(read_json(s)?, "element")?;
        return Ok(tower.element_from_json(&j)?);
    }
    Ok(tower.parse_element(s)?)
}

fn parse_rational(s: &str) -> Res<quadtower::Q> {
    parse_q(s.trim()).map_err(|e| malformed(e.to_string()))
}

enum Output {
    Json(Value),
    Text(String),
}

fn to_json<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("reports serialize")
}

fn require_json(g: &Global, what: &str) -> Res<()> {
    if g.format == Format::Csv {
        return Err(invalid(format!("{what} has no CSV form")));
    }
    Ok(())
}

fn tower_cmd(g: &Global, cmd: &TowerCmd) -> Res<(Output, Option<Failure>)> {
    require_json(g, "tower output")?;
    match cmd {
        TowerCmd::Build { primes, units, units_from } => {
            let base = Tower::base_i64(primes)?;
            let mut s0: Vec<FieldElement> = units.iter().map(|u| parse_element(&base, u)).collect::<Res<_>>()?;
            if let Some(src) = units_from {
                let v = read_json(src)?;
                let list = v.get("units").cloned().unwrap_or(v);
                let arr = list.as_array().ok_or_else(|| malformed("units must be a list"))?;
                for u in arr {
                    let el = match u {
                        Value::String(s) => parse_element(&base, s)?,
                        Value::Object(o) if o.contains_key("element") => {
                            base.element_from_json(&from_value(o["element"].clone(), "element")?)?
                        }
                        other => base.element_from_json(&from_value(other.clone(), "element")?)?,
                    };
                    s0.push(el);
                }
            }
            let (tower, report) = unramified::build_tower(primes, &s0)?;
            Ok((
                Output::Json(json!({
                    "tower": tower.to_json(),
                    "units": s0.iter().map(|u| u.to_string()).collect::<Vec<_>>(),
                    "report": report,
                })),
                None,
            ))
        }
        TowerCmd::SearchUnits { primes, max_candidates, no_saturate } => {
            let base = Tower::base_i64(primes)?;
            let budget = UnitBudget {
                exponent_bound: g.exponent_bound,
                max_candidates: *max_candidates,
                saturate: !no_saturate,
            };
            let r = unramified::unit_search(&base, &budget)?;
            let units: Vec<Value> = r
                .units
                .iter()
                .zip(&r.exponents)
                .map(|(u, (sign, e))| json!({"expr": u.to_string(), "element": u.to_json(), "sign": sign, "exponents": e}))
                .collect();
            let out = json!({
                "primes": primes,
                "budget": budget,
                "note": if budget.saturate { unramified::UNIT_SATURATED_NOTE } else { unramified::UNIT_SUBGROUP_NOTE },
                "generators": r.generators.iter().map(|u| u.to_string()).collect::<Vec<_>>(),
                "units": units,
                "counts": r.counts,
                "budget_exhausted": r.budget_exhausted,
            });
            let fail = r.budget_exhausted.then(|| Failure {
                exit: 3,
                code: "budget_exhausted".into(),
                message: format!("unit search stopped after {} candidates", r.counts.examined),
            });
            Ok((Output::Json(out), fail))
        }
    }
}

fn unramified_cmd(g: &Global, cmd: &UnramifiedCmd) -> Res<(Output, Option<Failure>)> {
    require_json(g, "a certificate")?;
    let UnramifiedCmd::Check { field, w, beta, max_candidates, height_bound } = cmd;
    let tower = read_tower(field)?;
    let w = parse_element(&tower, w)?;
    if let Some(b) = beta {
        let b = parse_element(&tower, b)?;
        let cert = unramified::check_unramified_witness(&w, &b)?;
        return Ok((Output::Json(to_json(&cert.to_json())), None));
    }
    let budget = SearchBudget { max_candidates: *max_candidates, height_bound: *height_bound, unit_exponent_bound: 2 };
    Ok(match unramified::search_witness(&w, &budget)? {
        WitnessSearch::Found(cert, n) => {
            let mut v = to_json(&cert.to_json());
            v["candidates_tested"] = json!(n);
            (Output::Json(v), None)
        }
        WitnessSearch::NotSquareIdeal => (
            Output::Json(json!({"valid": false, "reason": "the ideal wO_L is not a square", "w_expr": w.to_string()})),
            None,
        ),
        WitnessSearch::NotFound(n) => (
            Output::Json(json!({"valid": false, "reason": "no witness in the candidate set", "candidates_tested": n})),
            None,
        ),
        WitnessSearch::BudgetExhausted(n) => (
            Output::Json(json!({"valid": false, "reason": "candidate budget exhausted", "candidates_tested": n})),
            Some(Failure {
                exit: 3,
                code: "budget_exhausted".into(),
                message: format!("stopped after {n} candidates"),
            }),
        ),
    })
}

fn read_domain(arg: &str) -> Res<domain::Domain> {
    let j: DomainJson = from_value(read_json(arg)?, "domain")?;
    Ok(domain::Domain::from_json(&j)?)
}

fn domain_cmd(g: &Global, cmd: &DomainCmd) -> Res<Output> {
    match cmd {
        DomainCmd::Build { tower, subset_order, order } => {
            require_json(g, "a domain")?;
            let t = read_tower(tower)?;
            let ord = match (order, subset_order) {
                (Some(v), _) => SubsetOrder::Explicit(v.clone()),
                (None, OrderArg::Cardinality) => SubsetOrder::CardinalityThenBinary,
                (None, OrderArg::Binary) => SubsetOrder::Binary,
            };
            let d = domain::build_domain(&t, ord, g.precision_bits)?;
            Ok(Output::Json(to_json(&d.to_json())))
        }
        DomainCmd::Reduce { domain: src, point } => {
            require_json(g, "a reduction")?;
            let d = read_domain(src)?;
            let alpha = parse_element(d.tower(), point)?;
            let r = domain::reduce_point(&d, &alpha)?;
            let residue = r.residue_element(&d);
            if &residue + &r.shift_element != alpha {
                return Err(Error::Internal("residue + shift differs from the input".into()).into());
            }
            let res_rows: Vec<Vec<String>> = r.residue.iter().map(|row| row.iter().map(format_q).collect()).collect();
            let shift_rows: Vec<Vec<String>> =
                r.shift.iter().map(|row| row.iter().map(BigInt::to_string).collect()).collect();
            Ok(Output::Json(json!({
                "input": alpha.to_string(),
                "residue_coordinates": res_rows,
                "residue": residue.to_string(),
                "residue_element": residue.to_json(),
                "shift_coordinates": shift_rows,
                "shift": r.shift_element.to_string(),
                "shift_element": r.shift_element.to_json(),
                "in_box": domain::in_box(&d, &residue),
            })))
        }
        DomainCmd::Report { domain: src } => {
            let d = read_domain(src)?;
            let rep = domain::bound_report(&d, g.vertex_cap, g.precision_bits)?;
            if g.format == Format::Csv {
                return Ok(Output::Text(rep.csv()));
            }
            let idx = domain::index_in_on(&d)?;
            let (lhs, rhs) = domain::covolume_identity(&d)?;
            let radii = domain::domain_radii(&d, g.vertex_cap, g.precision_bits)?;
            Ok(Output::Json(json!({
                "h": d.to_json().h_expr,
                "report": rep,
                "index": idx,
                "covolume_squared": {"gram_determinant": format_q(&lhs), "from_discriminant": format_q(&rhs), "equal": lhs == rhs},
                "radii": radii,
            })))
        }
    }
}

fn voronoi_cmd(g: &Global, cmd: &VoronoiCmd) -> Res<Output> {
    require_json(g, "a field report")?;
    let VoronoiCmd::Field { field } = cmd;
    let f = NumberField::parse(field)?;
    Ok(Output::Json(to_json(&voronoi::field_report(&f, g.precision_bits, g.enum_nodes)?)))
}

fn cyclo_cmd(g: &Global, cmd: &CycloCmd) -> Res<Output> {
    let CycloCmd::Scan { min_m, max_m, epsilon } = cmd;
    let eps = voronoi::parse_epsilon(epsilon)?;
    // the scan decides signs with its own precision escalation
    let scan = voronoi::cyclo_scan(*min_m, *max_m, &eps, g.precision_bits.min(128))?;
    Ok(match g.format {
        Format::Csv => Output::Text(scan.csv()),
        Format::Json => Output::Json(to_json(&scan)),
    })
}

fn read_lattice(arg: &str) -> Res<LatticeInstance> {
    let j: LatticeJson = from_value(read_json(arg)?, "lattice")?;
    Ok(LatticeInstance::from_json(&j)?)
}

fn lattice_cmd(g: &Global, cmd: &LatticeCmd) -> Res<Output> {
    require_json(g, "lattice output")?;
    let prec = g.precision_bits;
    let budget = g.enum_nodes;
    Ok(Output::Json(match cmd {
        LatticeCmd::Lll { lattice: src, delta } => {
            let lat = read_lattice(src)?;
            let delta = parse_rational(delta)?;
            let r = lattice::lll_reduce(&lat, &delta)?;
            let u: Vec<Vec<String>> =
                r.transform.iter().map(|row| row.iter().map(BigInt::to_string).collect()).collect();
            json!({"lattice": r.lattice.to_json(), "transform": u})
        }
        LatticeCmd::Svp { lattice: src, norm, bound } => {
            let lat = read_lattice(src)?;
            match norm {
                NormArg::L2 => to_json(&lattice::shortest_vector_l2(&lat, budget)?),
                NormArg::Linf => {
                    let b = match bound {
                        Some(s) => Interval::point(parse_rational(s)?),
                        None => Interval::point(lattice::shortest_vector_l2(&lat, budget)?.norm_sq).sqrt(prec),
                    };
                    match lattice::shortest_vector_linf(&lat, &b, prec, budget)? {
                        Some(v) => to_json(&v),
                        None => json!({"found": false, "bound": b}),
                    }
                }
            }
        }
        LatticeCmd::Cvp { lattice: src, target, ambient } => {
            let lat = read_lattice(src)?;
            let t: Vec<quadtower::Q> = target.iter().map(|s| parse_rational(s)).collect::<Res<_>>()?;
            let r = if *ambient {
                lattice::closest_vector_ambient(&lat, &t, prec, budget)?
            } else {
                lattice::closest_vector(&lat, &t, prec, budget)?
            };
            to_json(&r)
        }
        LatticeCmd::Cover { lattice: src, mode } => {
            let lat = read_lattice(src)?;
            let m = match mode {
                ModeArg::Exact => CoverMode::Exact,
                ModeArg::Bounds => CoverMode::Bounds,
            };
            to_json(&lattice::covering_radius_small(&lat, m, prec, budget)?)
        }
    }))
}

fn check_budgets(g: &Global) -> Res<()> {
    if g.precision_bits < 32 {
        return Err(invalid("--precision-bits must be at least 32"));
    }
    if g.exponent_bound == 0 || g.vertex_cap == 0 || g.enum_nodes == 0 {
        return Err(invalid("budgets must be positive"));
    }
    if g.workers == Some(0) {
        return Err(invalid("--workers must be positive"));
    }
    Ok(())
}

fn run(cli: &Cli) -> Res<Option<Failure>> {
    let g = &cli.global;
    check_budgets(g)?;
    if let Some(w) = g.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build_global()
            .map_err(|e| invalid(format!("cannot start workers: {e}")))?;
    }
    let (out, late) = match &cli.cmd {
        Command::Tower(c) => tower_cmd(g, c)?,
        Command::Unramified(c) => unramified_cmd(g, c)?,
        Command::Domain(c) => (domain_cmd(g, c)?, None),
        Command::Voronoi(c) => (voronoi_cmd(g, c)?, None),
        Command::Cyclo(c) => (cyclo_cmd(g, c)?, None),
        Command::Lattice(c) => (lattice_cmd(g, c)?, None),
    };
    let text = match out {
        Output::Json(v) => serde_json::to_string_pretty(&v).expect("JSON renders") + "\n",
        Output::Text(t) => t,
    };
    match &g.output {
        Some(p) => fs::write(p, text).map_err(|e| invalid(format!("cannot write {}: {e}", p.display())))?,
        None => {
            let mut so = std::io::stdout().lock();
            let _ = so.write_all(text.as_bytes());
        }
    }
    Ok(late)
}

fn report(f: &Failure) -> ExitCode {
    let v = json!({"error": {"code": f.code, "message": f.message, "exit": f.exit}});
    eprintln!("{v}");
    ExitCode::from(f.exit)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let msg = e.render().to_string();
            return report(&Failure { exit: 64, code: "usage".into(), message: msg.trim().to_string() });
        }
    };
    match run(&cli) {
        Ok(None) => ExitCode::SUCCESS,
        Ok(Some(f)) | Err(f) => report(&f),
    }
}
