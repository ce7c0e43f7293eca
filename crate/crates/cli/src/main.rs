mod io;

use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use stokes_core::liealg::{GradedElement, GradedSystem, Kind, Ray};
use stokes_core::oracle::{isomonodromy_flow, stokes_factor_numeric, IrregularSystem};
use stokes_core::stokes::{
    multipliers_from_factors, multipliers_series, stokes_factor_matrix, stokes_factor_series, stokes_inverse,
    stokes_map, TruncationPolicy,
};
use stokes_core::transforms::{invert, lie_transform_check, make_j_over, Transform};
use stokes_core::trees::{count, enumerate};
use stokes_core::{CMat, Error, C64};

use io::SchemaError;

#[derive(Parser)]
#[command(name = "stokes", version, about = "Stokes data of irregular connections")]
struct Cli {
    /// Evaluation tolerance, in (0, 1e-2].
    #[arg(long, global = true, default_value_t = 1e-10)]
    tol: f64,
    /// Truncation order of the series, at most 12.
    #[arg(long, global = true, default_value_t = 8)]
    order: usize,
    /// Fail with exit code 4 if the last series order exceeds `tol`.
    #[arg(long, global = true)]
    check_convergence: bool,
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,
    /// Write the JSON result here instead of stdout.
    #[arg(long, short, global = true)]
    output: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Family {
    M,
    L,
    Q,
    Qtilde,
}

#[derive(Clone, Copy, ValueEnum)]
enum TransformName {
    M,
    L,
    /// Tree formula.
    J,
    /// Inductive inverse of `L`.
    JInductive,
    Q,
    Qtilde,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Series,
    Factors,
}

#[derive(Clone, Copy, ValueEnum)]
enum Check {
    Factor,
    MapRoundtrip,
    Multipliers,
    Imd,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate one multilogarithm family at a tuple.
    MlogEval {
        #[arg(long = "fn", value_enum, ignore_case = true)]
        family: Family,
        /// Tuple as JSON, e.g. "[[-1,0],[0,1]]".
        #[arg(long)]
        tuple: String,
        /// Ray for Q and Q̃, in multiples of π.
        #[arg(long, default_value_t = 0.0)]
        ray: f64,
    },
    /// Evaluate a transform, optionally testing the Lie property at the tuple.
    TransformEval {
        #[arg(long, value_enum, ignore_case = true)]
        name: TransformName,
        #[arg(long)]
        tuple: String,
        #[arg(long, default_value_t = 0.0)]
        ray: f64,
        #[arg(long)]
        lie: bool,
    },
    /// Enumerate plane trees.
    Trees {
        #[arg(long)]
        leaves: usize,
        /// Print only the number of trees.
        #[arg(long, conflicts_with = "list")]
        count: bool,
        /// List the trees (the default).
        #[arg(long)]
        list: bool,
    },
    /// ε = S(f).
    StokesMap {
        #[arg(long)]
        system: String,
        #[arg(long, alias = "element")]
        f: String,
    },
    /// f = S⁻¹(ε).
    StokesInverse {
        #[arg(long)]
        system: String,
        #[arg(long, alias = "element")]
        eps: String,
    },
    /// Stokes factor on a ray.
    StokesFactor {
        #[arg(long)]
        system: String,
        #[arg(long, alias = "element")]
        f: String,
        #[arg(long)]
        ray: f64,
    },
    /// Stokes multipliers for an admissible ray.
    Multipliers {
        #[arg(long)]
        system: String,
        #[arg(long, alias = "element")]
        f: String,
        #[arg(long)]
        ray: f64,
        #[arg(long, value_enum, default_value = "series")]
        method: Method,
    },
    /// Residual tables comparing independent routes; exit 1 if a check fails.
    Verify {
        #[arg(value_enum)]
        check: Check,
        #[arg(long)]
        system: String,
        /// Element f; a seeded random element of norm 0.05 if omitted.
        #[arg(long, alias = "f")]
        element: Option<String>,
        #[arg(long, default_value_t = 0.55)]
        ray: f64,
        /// Eigenvalue path for `imd`.
        #[arg(long)]
        path: Option<String>,
        /// Also write the report here.
        #[arg(long)]
        report: Option<String>,
        /// Emit the residual table as CSV.
        #[arg(long)]
        csv: bool,
    },
    /// Integrate the isomonodromy equations along an eigenvalue path.
    ImdFlow {
        #[arg(long)]
        system: String,
        #[arg(long, alias = "element")]
        f: String,
        #[arg(long)]
        path: String,
        #[arg(long, default_value_t = 1)]
        steps: usize,
    },
}

enum Failure {
    Schema(String),
    Core(Error),
}

impl From<SchemaError> for Failure {
    fn from(e: SchemaError) -> Self {
        Failure::Schema(e.0)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Invalid(m) => Failure::Schema(m),
            e => Failure::Core(e),
        }
    }
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Schema(_) => 2,
            Failure::Core(Error::NonGeneric(_)) => 3,
            Failure::Core(Error::NotConverged { .. }) => 4,
            Failure::Core(_) => 1,
        }
    }

    fn to_json(&self) -> Value {
        let (kind, message) = match self {
            Failure::Schema(m) => ("SchemaError".to_string(), m.clone()),
            Failure::Core(e) => (variant_name(e), e.to_string()),
        };
        json!({"error": {"kind": kind, "message": message, "exit_code": self.code()}})
    }
}

fn variant_name(e: &Error) -> String {
    let dbg = format!("{e:?}");
    dbg.split(|c: char| !c.is_alphanumeric())
        .next()
        .unwrap_or("Error")
        .to_string()
}

type Out = Result<(Value, bool), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let text = e.render().to_string();
            let first = text.lines().next().unwrap_or("");
            let f = Failure::Schema(first.trim_start_matches("error: ").to_string());
            println!("{}", serde_json::to_string_pretty(&f.to_json()).expect("serializable"));
            return ExitCode::from(f.code());
        }
    };
    let result = check_config(&cli).and_then(|_| run(&cli));
    let (value, code) = match result {
        Ok((v, true)) => (v, 0),
        Ok((v, false)) => (v, 1),
        Err(f) => (f.to_json(), f.code()),
    };
    let text = match &value {
        Value::String(s) => s.clone(),
        v => serde_json::to_string_pretty(v).expect("serializable") + "\n",
    };
    match &cli.output {
        Some(path) if code == 0 || code == 1 => {
            if let Err(e) = std::fs::write(path, &text) {
                eprintln!("cannot write {path}: {e}");
                return ExitCode::from(1);
            }
        }
        _ => print!("{text}"),
    }
    ExitCode::from(code)
}

fn check_config(cli: &Cli) -> Result<(), Failure> {
    if !(cli.tol > 0.0 && cli.tol <= 1e-2) {
        return Err(Failure::Schema(format!("tol must be in (0, 1e-2], got {}", cli.tol)));
    }
    if cli.order == 0 || cli.order > 12 {
        return Err(Failure::Schema(format!("order must be in 1..=12, got {}", cli.order)));
    }
    Ok(())
}

fn policy(cli: &Cli) -> Result<TruncationPolicy, Failure> {
    let p = TruncationPolicy::new(cli.order, cli.tol)?;
    Ok(if cli.check_convergence { p.checked() } else { p })
}

fn load_system(arg: &str) -> Result<GradedSystem, Failure> {
    Ok(io::system(&io::load(arg)?)?)
}

fn load_element(arg: &str, sys: &GradedSystem, kind: Kind) -> Result<GradedElement, Failure> {
    Ok(io::element(&io::load(arg)?, sys, kind)?)
}

fn transform(name: TransformName, ray: f64, tol: f64) -> Result<Transform, Failure> {
    Ok(match name {
        TransformName::M => Transform::m(tol),
        TransformName::L => Transform::l(tol),
        TransformName::J => make_j_over(&Transform::l(tol)),
        TransformName::JInductive => invert(&Transform::l(tol))?,
        TransformName::Q => Transform::q(ray, tol),
        TransformName::Qtilde => Transform::qtilde(ray, tol),
    })
}

fn run(cli: &Cli) -> Out {
    match &cli.command {
        Command::MlogEval { family, tuple, ray } => {
            let name = match family {
                Family::M => TransformName::M,
                Family::L => TransformName::L,
                Family::Q => TransformName::Q,
                Family::Qtilde => TransformName::Qtilde,
            };
            let t = transform(name, *ray, cli.tol)?;
            evaluate(&t, tuple, |_, _| None)
        }
        Command::TransformEval { name, tuple, ray, lie } => {
            let t = transform(*name, *ray, cli.tol)?;
            let tol = cli.tol.max(1e-9);
            evaluate(&t, tuple, |t, z| {
                lie.then(|| json!(lie_transform_check(t, z.len(), z, tol)))
            })
        }
        Command::Trees {
            leaves,
            count: only_count,
            ..
        } => {
            if *only_count {
                if *leaves == 0 || *leaves > stokes_core::trees::MAX_LEAVES {
                    return Err(Failure::Schema(format!(
                        "leaves must be in 1..={}",
                        stokes_core::trees::MAX_LEAVES
                    )));
                }
                return Ok((Value::String(format!("{}\n", count(*leaves))), true));
            }
            let trees: Vec<String> = enumerate(*leaves)?.iter().map(|t| t.to_string()).collect();
            Ok((json!({"leaves": leaves, "count": trees.len(), "trees": trees}), true))
        }
        Command::StokesMap { system, f } => {
            let sys = load_system(system)?;
            let f = load_element(f, &sys, Kind::F)?;
            let eps = stokes_map(&sys, &f, &policy(cli)?)?;
            Ok((io::element_json(&eps), true))
        }
        Command::StokesInverse { system, eps } => {
            let sys = load_system(system)?;
            let eps = load_element(eps, &sys, Kind::Epsilon)?;
            let f = stokes_inverse(&sys, &eps, &policy(cli)?)?;
            Ok((io::element_json(&f), true))
        }
        Command::StokesFactor { system, f, ray } => {
            let sys = load_system(system)?;
            let f = load_element(f, &sys, Kind::F)?;
            let p = policy(cli)?;
            let r = Ray::new(*ray);
            let delta = stokes_factor_series(&sys, &f, &r, &p)?;
            let s = stokes_factor_matrix(&sys, &f, &r, &p)?;
            Ok((
                json!({"ray": r.angle, "delta": io::element_json(&delta), "factor": io::matrix_json(&s)}),
                true,
            ))
        }
        Command::Multipliers { system, f, ray, method } => {
            let sys = load_system(system)?;
            let f = load_element(f, &sys, Kind::F)?;
            let r = Ray::new(*ray);
            let m = match method {
                Method::Series => multipliers_series(&sys, &f, &r, &policy(cli)?)?,
                Method::Factors => multipliers_from_factors(&sys, &f, &r, &policy(cli)?)?,
            };
            Ok((
                json!({"ray": r.angle, "plus": io::matrix_json(&m.plus), "minus": io::matrix_json(&m.minus)}),
                true,
            ))
        }
        Command::Verify {
            check,
            system,
            element,
            ray,
            path,
            report,
            csv,
        } => {
            let sys = load_system(system)?;
            let f = match element {
                Some(e) => load_element(e, &sys, Kind::F)?,
                None => random_element(&sys, cli.seed, 0.05),
            };
            let (rows, columns, threshold) = verify(cli, *check, &sys, &f, *ray, path.as_deref())?;
            let pass = rows.iter().all(|r| r.1.iter().all(|&x| x <= threshold));
            let value = if *csv {
                let mut s = format!("label,{}\n", columns.join(","));
                for (label, vals) in &rows {
                    let cells: Vec<String> = vals.iter().map(|v| format!("{v:e}")).collect();
                    s += &format!("{label},{}\n", cells.join(","));
                }
                Value::String(s)
            } else {
                let table: Vec<Value> = rows
                    .iter()
                    .map(|(label, vals)| {
                        let mut row = serde_json::Map::new();
                        row.insert("label".into(), json!(label));
                        for (c, v) in columns.iter().zip(vals) {
                            row.insert((*c).into(), json!(v));
                        }
                        Value::Object(row)
                    })
                    .collect();
                json!({
                    "check": check_name(*check),
                    "order": cli.order,
                    "tol": cli.tol,
                    "seed": cli.seed,
                    "threshold": threshold,
                    "pass": pass,
                    "residuals": table,
                })
            };
            if let Some(path) = report {
                let text = match &value {
                    Value::String(s) => s.clone(),
                    v => serde_json::to_string_pretty(v).expect("serializable") + "\n",
                };
                std::fs::write(path, text).map_err(|e| Failure::Schema(format!("cannot write {path}: {e}")))?;
            }
            Ok((value, pass))
        }
        Command::ImdFlow { system, f, path, steps } => {
            let sys = load_system(system)?;
            let f = load_element(f, &sys, Kind::F)?;
            let zp = io::z_path(&io::load(path)?)?;
            let g = isomonodromy_flow(&sys, &f, &zp, *steps, cli.tol)?;
            let end: Vec<Value> = zp.last().expect("nonempty").iter().map(|&z| io::c_json(z)).collect();
            Ok((json!({"eigenvalues": end, "f": io::element_json(&g)}), true))
        }
    }
}

/// Evaluates at one tuple (`{"value"}`) or a batch (`{"values"}`), in input order.
fn evaluate<X>(t: &Transform, tuple: &str, extra: X) -> Out
where
    X: Fn(&Transform, &[C64]) -> Option<Value>,
{
    let (zs, batch) = io::tuples(&io::load(tuple)?)?;
    let mut rows = Vec::with_capacity(zs.len());
    for z in &zs {
        let mut row = json!({"value": io::c_json(t.eval(z)?)});
        if let Some(x) = extra(t, z) {
            row["lie"] = x;
        }
        rows.push(row);
    }
    if batch {
        let values: Vec<Value> = rows.iter().map(|r| r["value"].clone()).collect();
        let mut out = json!({"values": values});
        if rows.iter().any(|r| r.get("lie").is_some()) {
            out["lie"] = Value::Array(rows.iter().map(|r| r["lie"].clone()).collect());
        }
        Ok((out, true))
    } else {
        Ok((rows.pop().expect("one tuple"), true))
    }
}

fn check_name(c: Check) -> &'static str {
    match c {
        Check::Factor => "factor",
        Check::MapRoundtrip => "map-roundtrip",
        Check::Multipliers => "multipliers",
        Check::Imd => "imd",
    }
}

fn random_element(sys: &GradedSystem, seed: u64, norm: f64) -> GradedElement {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = sys.dim();
    let m = CMat::from_fn(n, n, |_, _| {
        C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    });
    let mut e = GradedElement::zero(sys, Kind::F);
    for &a in sys.roots() {
        e.insert(a, sys.block_part(&m, a));
    }
    let s = norm / e.norm().max(f64::MIN_POSITIVE);
    let scaled = e.to_matrix() * C64::new(s, 0.0);
    let mut out = GradedElement::zero(sys, Kind::F);
    for &a in sys.roots() {
        out.insert(a, sys.block_part(&scaled, a));
    }
    out
}

fn max_entry(m: &CMat) -> f64 {
    m.iter().map(|v| v.norm()).fold(0.0, f64::max)
}

type Table = (Vec<(String, Vec<f64>)>, Vec<&'static str>, f64);

fn verify(
    cli: &Cli,
    check: Check,
    sys: &GradedSystem,
    f: &GradedElement,
    ray: f64,
    path: Option<&str>,
) -> Result<Table, Failure> {
    let p = policy(cli)?;
    match check {
        Check::Factor => {
            let irr = IrregularSystem::from_element(sys.clone(), f)?;
            let mut rows = Vec::new();
            for l in sys.stokes_rays()? {
                let num = stokes_factor_numeric(&irr, &l, None, cli.tol)?;
                let series = stokes_factor_matrix(sys, f, &l, &p)?;
                rows.push((
                    format!("ray {}", l.angle),
                    vec![
                        max_entry(&(&num.laplace - &series)),
                        max_entry(&(&num.block - &series)),
                        num.spread,
                    ],
                ));
            }
            Ok((rows, vec!["laplace_vs_series", "block_vs_series", "spread"], 1e-5))
        }
        Check::MapRoundtrip => {
            let eps = stokes_map(sys, f, &p)?;
            let back = stokes_inverse(sys, &eps, &p)?;
            Ok((
                vec![("roundtrip".into(), vec![max_entry(&(back.to_matrix() - f.to_matrix()))])],
                vec!["max_entry_error"],
                1e-6,
            ))
        }
        Check::Multipliers => {
            let r = Ray::new(ray);
            let a = multipliers_from_factors(sys, f, &r, &p)?;
            let b = multipliers_series(sys, f, &r, &p)?;
            Ok((
                vec![
                    ("plus".into(), vec![max_entry(&(&a.plus - &b.plus))]),
                    ("minus".into(), vec![max_entry(&(&a.minus - &b.minus))]),
                ],
                vec!["series_vs_factors"],
                1e-6,
            ))
        }
        Check::Imd => {
            let Some(path) = path else {
                return Err(Failure::Schema("verify imd needs --path".into()));
            };
            let zp = io::z_path(&io::load(path)?)?;
            let start = sys.with_eigenvalues(&zp[0])?;
            let end = sys.with_eigenvalues(zp.last().expect("nonempty"))?;
            let g = isomonodromy_flow(sys, f, &zp, 1, cli.tol.min(1e-12))?;
            let r = Ray::new(ray);
            let m0 = multipliers_series(&start, f, &r, &p)?;
            let m1 = multipliers_series(&end, &g, &r, &p)?;
            Ok((
                vec![
                    ("plus".into(), vec![max_entry(&(&m0.plus - &m1.plus))]),
                    ("minus".into(), vec![max_entry(&(&m0.minus - &m1.minus))]),
                ],
                vec!["multiplier_drift"],
                1e-4,
            ))
        }
    }
}
