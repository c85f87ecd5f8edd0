use std::path::Path;

use igflow_core::discrete::{integrate_discrete_flow, kl_divergence, FlowEndpoints};
use igflow_core::geometry::eikonal_residual;
use igflow_core::gradient::integrate_gradient_flow;
use igflow_core::hamilton::integrate_hamilton;
use igflow_core::verify::{run_verification, Suite, Tolerances, VerifyOptions};
use igflow_core::{
    DVector, HamiltonSystem, IntegratorConfig, ModelConfig, PhaseState, Trajectory, VielbeinModel,
};

use crate::args::{ExportArgs, FlowKind, SimulateArgs, VerifyArgs};
use crate::error::CliError;
use crate::table::{write_output, Table};

/// Environment variable naming a tolerance file. Takes precedence over `--tolerances`.
pub const TOLERANCES_ENV: &str = "IGFLOW_TOLERANCES";

fn load_model(path: Option<&Path>, what: &str) -> Result<(ModelConfig, VielbeinModel), CliError> {
    let path = path.ok_or_else(|| CliError::Config(format!("{what} needs --model")))?;
    let cfg = ModelConfig::load(path)?;
    let model = cfg.build()?;
    Ok((cfg, model))
}

fn integrator(args: &SimulateArgs, default_step: f64) -> IntegratorConfig {
    if args.adaptive {
        IntegratorConfig::rk45(args.rtol, args.atol, args.min_step, args.max_step, args.output_step)
    } else {
        IntegratorConfig::rk4(args.step.unwrap_or(default_step), args.output_step)
    }
}

fn trajectory_table(traj: &Trajectory) -> Table {
    let n = traj.first().state.dim();
    let mut header = vec![traj.kind().label().to_string()];
    header.extend((1..=n).map(|i| format!("q{i}")));
    header.extend((1..=n).map(|i| format!("p{i}")));
    let mut table = Table::new(header);
    for s in traj {
        let mut row = vec![s.param];
        row.extend(s.state.q.iter());
        row.extend(s.state.p.iter());
        table.rows.push(row);
    }
    table
}

pub fn simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let q0 = DVector::from_column_slice(&args.q0);
    let table = match args.kind {
        FlowKind::Hamilton => {
            let (_, model) = load_model(args.model.as_deref(), "simulate hamilton")?;
            let system = HamiltonSystem::new(model);
            let cfg = integrator(args, system.default_step());
            let state0 = system.model().on_shell_state(q0)?;
            trajectory_table(&integrate_hamilton(&system, &state0, args.span, &cfg)?)
        }
        FlowKind::Gradient => {
            let (_, model) = load_model(args.model.as_deref(), "simulate gradient")?;
            let cfg = integrator(args, 1e-3);
            trajectory_table(&integrate_gradient_flow(&model, &q0, args.span, &cfg)?)
        }
        FlowKind::Discrete => {
            if args.q2.is_empty() {
                return Err(CliError::Config("simulate discrete needs --q2".into()));
            }
            let endpoints = FlowEndpoints::new(&args.q0, &args.q2)?;
            let cfg = integrator(args, 1e-3);
            let n = endpoints.len();
            let mut header = vec!["t".to_string()];
            header.extend((1..=n).map(|i| format!("q{i}")));
            header.push("D".into());
            let mut table = Table::new(header);
            for (t, q) in integrate_discrete_flow(&endpoints, args.span, &cfg)? {
                let mut row = vec![t];
                row.extend(q.iter());
                row.push(kl_divergence(&q, endpoints.q2())?);
                table.rows.push(row);
            }
            table
        }
    };
    write_output(args.out.as_deref(), &table.to_csv())
}

fn load_tolerances(flag: Option<&Path>) -> Result<Tolerances, CliError> {
    let env = std::env::var_os(TOLERANCES_ENV).filter(|v| !v.is_empty());
    let path = match (env.as_deref(), flag) {
        (Some(p), _) => Path::new(p),
        (None, Some(p)) => p,
        (None, None) => return Ok(Tolerances::default()),
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    Ok(Tolerances::from_json(&text)?)
}

pub fn verify(args: &VerifyArgs) -> Result<(), CliError> {
    let suite: Suite = args.suite.parse()?;
    let tolerances = load_tolerances(args.tolerances.as_deref())?;
    let (cfg, model) = load_model(Some(&args.model), "verify")?;
    let echo = serde_json::to_value(&cfg).expect("model config serializes");
    let opts = VerifyOptions {
        suite,
        tolerances,
        seed: args.seed,
    };
    let report = run_verification(&model, echo, &opts)?;
    write_output(args.out.as_deref(), report.to_json().as_bytes())?;
    if report.all_passed() {
        Ok(())
    } else {
        for c in report.checks.iter().filter(|c| !c.pass) {
            eprintln!("FAIL {}: residual {:e} > {:e} ({})", c.name, c.residual, c.tolerance, c.anchor);
        }
        Err(CliError::VerifyFailed {
            passed: report.summary.passed,
            total: report.summary.total,
        })
    }
}

/// Column positions of a trajectory table.
struct Layout {
    q: Vec<usize>,
    p: Vec<usize>,
}

impl Layout {
    fn of(table: &Table) -> Result<Self, CliError> {
        match table.header.first().map(String::as_str) {
            Some("tau") | Some("t") => {}
            _ => {
                return Err(CliError::Config(
                    "input is not a trajectory: first column must be 'tau' or 't'".into(),
                ))
            }
        }
        let indexed = |prefix: &str| -> Vec<usize> {
            (1..).map_while(|i| table.column(&format!("{prefix}{i}"))).collect()
        };
        let q = indexed("q");
        if q.is_empty() {
            return Err(CliError::Config("input has no q1 column".into()));
        }
        let p = indexed("p");
        if !p.is_empty() && p.len() != q.len() {
            return Err(CliError::Config("input has different numbers of q and p columns".into()));
        }
        Ok(Self { q, p })
    }

    fn state(&self, row: &[f64]) -> Result<PhaseState, CliError> {
        if self.p.is_empty() {
            return Err(CliError::Config("this quantity needs momentum columns p1..pN".into()));
        }
        Ok(PhaseState::new(
            DVector::from_iterator(self.q.len(), self.q.iter().map(|&i| row[i])),
            DVector::from_iterator(self.p.len(), self.p.iter().map(|&i| row[i])),
        ))
    }

    fn q(&self, row: &[f64]) -> DVector<f64> {
        DVector::from_iterator(self.q.len(), self.q.iter().map(|&i| row[i]))
    }
}

const QUANTITIES: [&str; 6] = ["s", "T", "P", "H", "D", "eikonal"];

pub fn export_plotdata(args: &ExportArgs) -> Result<(), CliError> {
    let bytes = std::fs::read(&args.input)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", args.input.display())))?;
    let quantities: Vec<&str> = args
        .quantities
        .iter()
        .map(|q| q.trim())
        .filter(|q| !q.is_empty())
        .collect();
    if let Some(bad) = quantities.iter().find(|q| !QUANTITIES.contains(q)) {
        return Err(CliError::Config(format!(
            "unknown quantity '{bad}' (expected one of {})",
            QUANTITIES.join(", ")
        )));
    }
    if quantities.is_empty() {
        return write_output(args.out.as_deref(), &bytes);
    }
    let mut table = Table::from_csv(&bytes)?;
    let layout = Layout::of(&table)?;
    let needs_model = quantities.iter().any(|q| matches!(*q, "s" | "H" | "eikonal"));
    let model = if needs_model {
        Some(load_model(args.model.as_deref(), "export-plotdata with s, H or eikonal")?.1)
    } else {
        None
    };
    let q2 = if quantities.contains(&"D") {
        if args.q2.len() != layout.q.len() {
            return Err(CliError::Config(format!(
                "D needs --q2 with {} entries",
                layout.q.len()
            )));
        }
        Some(DVector::from_column_slice(&args.q2))
    } else {
        None
    };
    let mut derived: Vec<Vec<f64>> = Vec::with_capacity(table.rows.len());
    for row in &table.rows {
        let mut values = Vec::with_capacity(quantities.len());
        for q in &quantities {
            let value = match *q {
                "s" => model.as_ref().expect("loaded above").entropy(&layout.q(row))?,
                "T" => layout.state(row)?.temperature(),
                "P" => {
                    if layout.q.len() < 2 {
                        return Err(CliError::Config("P needs a two-dimensional state".into()));
                    }
                    layout.state(row)?.pressure()
                }
                "H" => HamiltonSystem::new(model.clone().expect("loaded above")).hamiltonian(&layout.state(row)?)?,
                "eikonal" => {
                    let m = model.as_ref().expect("loaded above");
                    let state = layout.state(row)?;
                    eikonal_residual(&m.metric(&state.q)?, &state.p, m.energy())
                }
                "D" => kl_divergence(&layout.q(row), q2.as_ref().expect("parsed above"))?,
                _ => unreachable!("validated above"),
            };
            values.push(value);
        }
        derived.push(values);
    }
    table.header.extend(quantities.iter().map(|q| q.to_string()));
    for (row, values) in table.rows.iter_mut().zip(derived) {
        row.extend(values);
    }
    write_output(args.out.as_deref(), &table.to_csv())
}
