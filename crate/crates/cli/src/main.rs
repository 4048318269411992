use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use nalgebra::DMatrix;
use serde::Serialize;

use feynknot::bundle::{
    group_checks, isotopy_suite, limit_suite, structure_group, trivialization_suite, PropertyCheck,
};
use feynknot::diagram::{enumerate_diagrams, KnotGraph};
use feynknot::geometry::KnotCurve;
use feynknot::integrator::{
    anomaly_classes, check_dimension, consistent_with_zero, integrate_diagram, IntegratorError, McOptions,
};
use feynknot::invariants::{canonicalize_key, normalized_v2, v2_oracle, GaussCode, InvariantError};
use feynknot::strata::EdgeOrdering;

#[derive(Parser)]
#[command(
    name = "feynknot",
    version,
    about = "Configuration-space integrals and anomaly-bundle checks for knot graphs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Copy)]
struct McArgs {
    /// Monte-Carlo samples per diagram.
    #[arg(long, default_value_t = 1_000_000, value_parser = clap::value_parser!(u64).range(1..))]
    samples: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, env = "FEYNKNOT_THREADS", default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    threads: u64,
}

impl McArgs {
    fn options(self) -> McOptions {
        McOptions::new(self.samples, self.seed).threads(self.threads as usize)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Canonical diagrams of one order as JSON, with |Γ| per class.
    Enumerate {
        #[arg(long)]
        order: i64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// I(Γ, K) for one diagram and knot.
    Integrate {
        /// Diagram JSON file, or a class key such as 4/0:b1-b3,b2-b4.
        #[arg(long)]
        diagram: String,
        /// Knot name (unknot, trefoil, figure8, torus(p,q)) or knot JSON file.
        #[arg(long)]
        knot: String,
        #[command(flatten)]
        mc: McArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Anomaly integrals of every top-degree class of one order.
    Anomaly {
        #[arg(long, default_value_t = 2)]
        order: i64,
        #[command(flatten)]
        mc: McArgs,
        /// Largest accepted |value|.
        #[arg(long, default_value_t = 0.05)]
        tolerance: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Trivialization, isotopy, transition and structure-group certificate.
    BundleCheck {
        /// Check every diagram of orders 1..=ORDER.
        #[arg(long, default_value_t = 2, conflicts_with = "diagram")]
        order: i64,
        /// Check a single diagram (JSON file or class key) instead.
        #[arg(long)]
        diagram: Option<String>,
        /// Sampled strata for the transition and structure-group checks.
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        /// Height functions per diagram for the trivialization suite.
        #[arg(long, default_value_t = 1000)]
        heights: usize,
        /// Height functions per diagram for the isotopy suite.
        #[arg(long, default_value_t = 100)]
        isotopy_heights: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Also run the boundary-limit suite with this many draws per stratum.
        #[arg(long)]
        limits: Option<usize>,
        /// Inject diag(SCALE, 1, ...) as a generator of the first diagram with
        /// inner vertices.
        #[arg(long)]
        inject_scale: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Normalized order-2 invariant of a knot.
    Invariant {
        #[arg(long)]
        knot: String,
        #[command(flatten)]
        mc: McArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// v₂ of a signed Gauss code such as O1+U2+O3+U1+O2+U3+.
    Oracle {
        #[arg(long)]
        code: String,
    },
}

enum Failure {
    /// A checked property did not hold.
    Violation(String),
    Usage(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Usage(e)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Violation(msg)) => {
            eprintln!("feynknot: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(e)) => {
            eprintln!("feynknot: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn emit(out: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn load_knot(arg: &str) -> anyhow::Result<KnotCurve> {
    let path = Path::new(arg);
    let k = if path.is_file() {
        let text = fs::read_to_string(path).with_context(|| format!("reading {arg}"))?;
        KnotCurve::from_json(&text)?
    } else {
        KnotCurve::named(arg)?
    };
    k.check_embedding()?;
    Ok(k)
}

fn load_diagram(arg: &str) -> anyhow::Result<KnotGraph> {
    let path = Path::new(arg);
    if path.is_file() {
        let text = fs::read_to_string(path).with_context(|| format!("reading {arg}"))?;
        return Ok(KnotGraph::from_json(&text)?);
    }
    let key = canonicalize_key(arg).map_err(|e| anyhow!("{arg:?} is neither a diagram file nor a class key: {e}"))?;
    diagram_from_key(&key)
}

/// The enumerated representative with this canonical key.
fn diagram_from_key(key: &str) -> anyhow::Result<KnotGraph> {
    let (counts, edges) = key.split_once(':').ok_or_else(|| anyhow!("malformed key {key}"))?;
    let (_, s) = counts.split_once('/').ok_or_else(|| anyhow!("malformed key {key}"))?;
    let e = edges.split(',').filter(|x| !x.is_empty()).count() as i64;
    let order = e - s.parse::<i64>()?;
    enumerate_diagrams(order, 3 * order.max(1) as usize)?
        .into_iter()
        .find(|g| g.canonical_key() == key)
        .ok_or_else(|| anyhow!("{key} is not a normal knot-connected diagram"))
}

#[derive(Serialize)]
struct EnumeratedClass {
    key: String,
    automorphisms: usize,
    top_degree: bool,
    diagram: feynknot::diagram::DiagramFile,
}

#[derive(Serialize)]
struct Certificate {
    status: &'static str,
    diagrams: Vec<String>,
    seed: u64,
    properties: Vec<PropertyCheck>,
    groups: Vec<feynknot::bundle::DiagramGroup>,
    violations: Vec<feynknot::bundle::Violation>,
}

fn run(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Enumerate { order, out } => {
            let classes: Vec<EnumeratedClass> = enumerate_diagrams(order, 3 * order.max(0) as usize)
                .map_err(anyhow::Error::from)?
                .into_iter()
                .map(|g| EnumeratedClass {
                    key: g.canonical_key(),
                    automorphisms: g.automorphisms().len(),
                    top_degree: check_dimension(&g),
                    diagram: g.to_file(),
                })
                .collect();
            let text = serde_json::to_string_pretty(&classes).map_err(anyhow::Error::from)? + "\n";
            emit(out.as_deref(), &text)?;
        }
        Command::Integrate { diagram, knot, mc, out } => {
            let g = load_diagram(&diagram)?;
            let k = load_knot(&knot)?;
            let e = integrate_diagram(&g, &EdgeOrdering::identity(g.n_edges()), &k, &mc.options())
                .map_err(|e| Failure::Usage(e.into()))?;
            let text = format!(
                "diagram\tknot\tvalue\tstderr\tsamples\trejected\tseed\n{}\t{}\t{:e}\t{:e}\t{}\t{}\t{}\n",
                g.canonical_key(),
                knot,
                e.value,
                e.stderr,
                e.samples,
                e.rejected,
                e.seed
            );
            emit(out.as_deref(), &text)?;
        }
        Command::Anomaly { order, mc, tolerance, out } => {
            if !(tolerance >= 0.0) {
                return Err(anyhow!("tolerance must be nonnegative").into());
            }
            let rows = anomaly_classes(order, &mc.options()).map_err(|e: IntegratorError| Failure::Usage(e.into()))?;
            let mut text = String::from("diagram\tautomorphisms\tvalue\tstderr\tsamples\trejected\tseed\tstatus\n");
            let mut failed = Vec::new();
            for (g, e) in &rows {
                let ok = consistent_with_zero(e, tolerance);
                if !ok {
                    failed.push(g.canonical_key());
                }
                text += &format!(
                    "{}\t{}\t{:e}\t{:e}\t{}\t{}\t{}\t{}\n",
                    g.canonical_key(),
                    g.automorphisms().len(),
                    e.value,
                    e.stderr,
                    e.samples,
                    e.rejected,
                    e.seed,
                    if ok { "pass" } else { "fail" }
                );
            }
            emit(out.as_deref(), &text)?;
            if !failed.is_empty() {
                return Err(Failure::Violation(format!("anomaly not consistent with 0 for {}", failed.join(" "))));
            }
        }
        Command::BundleCheck { order, diagram, trials, heights, isotopy_heights, seed, limits, inject_scale, out } => {
            let diagrams = match diagram {
                Some(d) => vec![load_diagram(&d)?],
                None => {
                    if order < 1 {
                        return Err(anyhow!("order must be at least 1").into());
                    }
                    let mut all = Vec::new();
                    for n in 1..=order {
                        all.extend(enumerate_diagrams(n, 3 * n as usize).map_err(anyhow::Error::from)?);
                    }
                    all
                }
            };
            let mut extra = Vec::new();
            if let Some(scale) = inject_scale {
                let (d, g) = diagrams
                    .iter()
                    .enumerate()
                    .find(|(_, g)| g.n_inner() > 0)
                    .ok_or_else(|| anyhow!("no diagram with inner vertices to inject into"))?;
                let mut m = DMatrix::identity(g.n_inner(), g.n_inner());
                m[(0, 0)] = scale;
                extra.push((d, m));
            }
            let mut properties = trivialization_suite(&diagrams, heights, seed);
            properties.extend(isotopy_suite(&diagrams, isotopy_heights, seed.wrapping_add(1)));
            let cert = structure_group(&diagrams, trials, seed.wrapping_add(2), &extra);
            properties.extend(group_checks(&cert));
            if let Some(draws) = limits {
                properties.extend(limit_suite(&diagrams, draws, seed.wrapping_add(3)));
            }
            let passed = properties.iter().all(PropertyCheck::passed) && cert.passed();
            let c = Certificate {
                status: if passed { "pass" } else { "fail" },
                diagrams: diagrams.iter().map(KnotGraph::canonical_key).collect(),
                seed,
                properties,
                groups: cert.groups,
                violations: cert.violations,
            };
            let text = serde_json::to_string_pretty(&c).map_err(anyhow::Error::from)? + "\n";
            emit(out.as_deref(), &text)?;
            if !passed {
                let failed: Vec<&str> =
                    c.properties.iter().filter(|p| !p.passed()).map(|p| p.property.as_str()).collect();
                return Err(Failure::Violation(format!("failed: {}", failed.join(", "))));
            }
        }
        Command::Invariant { knot, mc, out } => {
            let k = load_knot(&knot)?;
            let v = match normalized_v2(&k, &mc.options()) {
                Ok(v) => v,
                Err(e @ InvariantError::DegenerateDenominator { .. }) => return Err(Failure::Violation(e.to_string())),
                Err(e) => return Err(Failure::Usage(e.into())),
            };
            let text = format!(
                "knot\tnormalized_v2\tstderr\tsamples\tseed\n{}\t{:.6}\t{:.6}\t{}\t{}\n",
                knot, v.value, v.stderr, mc.samples, mc.seed
            );
            emit(out.as_deref(), &text)?;
        }
        Command::Oracle { code } => {
            let c = GaussCode::parse(&code).map_err(anyhow::Error::from)?;
            let v = v2_oracle(&c).map_err(anyhow::Error::from)?;
            println!("{v}");
        }
    }
    Ok(())
}
