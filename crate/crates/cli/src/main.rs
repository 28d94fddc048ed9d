use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use logva_core::commutative::Commutative;
use logva_core::logva::{self, CheckRecord, LogVAInstance};
use logva_core::nls::oracle::Oracle;
use logva_core::nls::{Letter, MixedRelation, NLSMonomial, NLSState, Nls, NlsInstance};
use logva_core::pva::{self, BracketTable, Placement};
use logva_core::scalar::GaussScalar;

const BUDGET_VAR: &str = "LOGVA_BUDGET";

#[derive(Parser, Debug)]
#[command(name = "logva", version, about = "Exact computations in braided logarithmic vertex algebras")]
struct Cli {
    #[arg(long, global = true, value_enum, default_value_t = InstanceSel::Nls)]
    instance: InstanceSel,
    /// Degree cutoff for basis states.
    #[arg(long, global = true, env = "LOGVA_DEGREE", default_value_t = 4)]
    degree: i64,
    /// Mode window `[-w, w]`.
    #[arg(long, global = true, env = "LOGVA_WINDOW", default_value_t = 3)]
    window: i64,
    /// λ-order `K` of truncated brackets.
    #[arg(long, global = true, env = "LOGVA_ORDER", default_value_t = 6)]
    order: i64,
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Recorded in every summary; all sweeps are exhaustive.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads; 0 uses all cores.
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum InstanceSel {
    Nls,
    NlsEps,
    NlsEpsPrinted,
    Commutative,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Target {
    Borcherds,
    Hexagon,
    Locality,
    Vacuum,
    Translation,
    NthProduct,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum TableSel {
    Nls,
    Literal,
    Transposed,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum PlacementSel {
    Both,
    FirstFactor,
    SecondFactor,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Normal monomials of exactly the given degree.
    Basis {
        #[arg(long)]
        charge: Option<i64>,
    },
    /// Apply a mode `g_n` to a monomial, e.g. `act w -1 'wb[-1] |0>'`.
    Act {
        letter: String,
        #[arg(allow_hyphen_values = true)]
        mode: i64,
        #[arg(default_value = "|0>")]
        state: String,
    },
    /// Axiom sweeps; defects are printed as JSON lines.
    Verify {
        #[arg(value_enum)]
        target: Target,
        /// Locality exponent `N`.
        #[arg(long, default_value_t = 0)]
        locality_n: i64,
    },
    /// `{f_λ g}` in the selected table, e.g. `bracket u "v^2"`.
    Bracket {
        f: String,
        g: String,
        #[arg(long, value_enum, default_value_t = TableSel::Nls)]
        table: TableSel,
        /// Also report skew-symmetry and Jacobi defects of the table.
        #[arg(long)]
        axioms: bool,
    },
    /// Poisson limit of the deformed instance, compared with the NLS table after `w = u + iv`.
    Limit {
        #[arg(long, value_enum, default_value_t = PlacementSel::Both)]
        placement: PlacementSel,
        /// Degree up to which commutativity mod ε is checked.
        #[arg(long, default_value_t = 3)]
        check_degree: i64,
        /// Print the limit table.
        #[arg(long)]
        table: bool,
    },
    /// Generalized VA data from a symmetric matrix, rows separated by `;`.
    Gva {
        #[arg(long, allow_hyphen_values = true, default_value = "-1,1;1,-1")]
        matrix: String,
        #[arg(long, value_delimiter = ',')]
        labels: Option<Vec<String>>,
    },
    /// Straightening against brute-force rewriting; `--window` bounds the modes.
    OracleCheck,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Runtime(String),
}

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Runtime(e.to_string())
    }
}

type Outcome = Result<bool, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.degree < 0 || cli.window < 0 || cli.order < 1 {
        eprintln!("error: windows must be positive");
        return ExitCode::from(2);
    }
    if cli.jobs > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.jobs).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Usage(m) | Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}

fn budget() -> Result<Option<u64>, Failure> {
    match std::env::var(BUDGET_VAR) {
        Ok(s) => s.parse().map(Some).map_err(|_| Failure::Usage(format!("{BUDGET_VAR} must be an integer"))),
        Err(_) => Ok(None),
    }
}

fn nls_for(sel: InstanceSel) -> Result<Nls, Failure> {
    let nls = match sel {
        InstanceSel::Nls => Nls::new(false),
        InstanceSel::NlsEps => Nls::new(true),
        InstanceSel::NlsEpsPrinted => Nls::new(true).with_mixed(MixedRelation::Printed),
        InstanceSel::Commutative => return Err(Failure::Usage("this subcommand needs an NLS instance".into())),
    };
    Ok(match budget()? {
        Some(b) => nls.with_budget(b),
        None => nls,
    })
}

fn emit(cli: &Cli, text: &str, value: Value) {
    match cli.format {
        Format::Text => println!("{text}"),
        Format::Json => println!("{value}"),
    }
}

fn run(cli: &Cli) -> Outcome {
    match &cli.command {
        Command::Basis { charge } => basis(cli, *charge),
        Command::Act { letter, mode, state } => act(cli, letter, *mode, state),
        Command::Verify { target, locality_n } => match cli.instance {
            InstanceSel::Commutative => verify(cli, &Commutative::new(2), *target, *locality_n),
            sel => verify(cli, &NlsInstance::from_nls(nls_for(sel)?), *target, *locality_n),
        },
        Command::Bracket { f, g, table, axioms } => bracket(cli, f, g, *table, *axioms),
        Command::Limit { placement, check_degree, table } => limit(cli, *placement, *check_degree, *table),
        Command::Gva { matrix, labels } => gva(cli, matrix, labels.as_deref()),
        Command::OracleCheck => oracle_check(cli),
    }
}

fn basis(cli: &Cli, charge: Option<i64>) -> Outcome {
    let nls = nls_for(cli.instance)?;
    let monos = nls.basis(cli.degree, charge);
    match cli.format {
        Format::Text => monos.iter().for_each(|m| println!("{m}")),
        Format::Json => {
            let list: Vec<String> = monos.iter().map(|m| m.to_string()).collect();
            println!("{}", json!({"degree": cli.degree, "charge": charge, "basis": list}));
        }
    }
    Ok(true)
}

fn act(cli: &Cli, letter: &str, mode: i64, state: &str) -> Outcome {
    let nls = nls_for(cli.instance)?;
    let g: Letter = letter.parse().map_err(|_| Failure::Usage(format!("unknown generator {letter:?}")))?;
    let m: NLSMonomial = state.parse().map_err(|e| Failure::Usage(format!("{e}")))?;
    let out = nls.act(g, mode, &NLSState::basis(m.clone()))?;
    emit(cli, &out.to_string(), json!({"letter": g.to_string(), "mode": mode, "input": m.to_string(), "result": out}));
    Ok(true)
}

fn report(cli: &Cli, records: &[CheckRecord], extra: Value) -> bool {
    for r in records.iter().filter(|r| !r.passed()) {
        println!("{}", r.json_line());
    }
    let summary = logva::summarize(records);
    let ok = summary.values().all(|(_, failed)| *failed == 0);
    match cli.format {
        Format::Text => {
            for (check, (passed, failed)) in &summary {
                println!("{check}: {} checked, {failed} defects", passed + failed);
            }
            println!("{}", if ok { "PASS" } else { "FAIL" });
        }
        Format::Json => {
            let counts: serde_json::Map<String, Value> =
                summary.iter().map(|(k, (p, f))| (k.clone(), json!({"checked": p + f, "defects": f}))).collect();
            println!("{}", json!({"summary": counts, "pass": ok, "context": extra}));
        }
    }
    ok
}

fn verify<I: LogVAInstance>(cli: &Cli, inst: &I, target: Target, locality_n: i64) -> Outcome {
    let (d, w) = (cli.degree, cli.window);
    let records = match target {
        Target::Borcherds => logva::sweep_borcherds(inst, d, w),
        Target::Hexagon => logva::sweep_hexagon(inst, d, w),
        Target::Locality => logva::sweep_locality(inst, d, w, locality_n),
        Target::Vacuum => logva::sweep_vacuum(inst, d, w),
        Target::Translation => logva::sweep_translation(inst, d, w),
        Target::NthProduct => logva::sweep_nth_product(inst, d, w),
    };
    let ctx = json!({"instance": inst.name(), "degree": d, "window": w, "seed": cli.seed});
    Ok(report(cli, &records, ctx))
}

fn table_for(sel: TableSel) -> BracketTable {
    match sel {
        TableSel::Nls => pva::nls_table(),
        TableSel::Literal => pva::nls_table_literal(),
        TableSel::Transposed => pva::nls_table_transposed(),
    }
}

fn bracket(cli: &Cli, f: &str, g: &str, sel: TableSel, axioms: bool) -> Outcome {
    let table = table_for(sel);
    let names = table.names().to_vec();
    let fp = pva::parse_poly(f, &names).map_err(|e| Failure::Usage(e.to_string()))?;
    let gp = pva::parse_poly(g, &names).map_err(|e| Failure::Usage(e.to_string()))?;
    let s = pva::master_bracket(&fp, &gp, &table, cli.order)?;
    emit(cli, &s.render(&names), json!({"f": f, "g": g, "bracket": s.to_json(&names)}));
    if !axioms {
        return Ok(true);
    }
    let n = names.len();
    let mut records = Vec::new();
    for a in 0..n {
        for b in 0..n {
            let d = pva::check_skew(&table, (a, b), cli.order)?;
            let defect = (!d.is_zero()).then(|| Value::String(d.render(&names)));
            records.push(CheckRecord { check: "skew".into(), indices: vec![names[a].clone(), names[b].clone()], defect });
            for c in 0..n {
                let d = pva::check_jacobi(&table, (a, b, c), cli.order)?;
                let defect = (!d.is_zero()).then(|| Value::String(d.render(&names)));
                let idx = vec![names[a].clone(), names[b].clone(), names[c].clone()];
                records.push(CheckRecord { check: "jacobi".into(), indices: idx, defect });
            }
        }
    }
    Ok(report(cli, &records, json!({"order": cli.order})))
}

fn limit(cli: &Cli, sel: PlacementSel, check_degree: i64, show: bool) -> Outcome {
    let placements: Vec<Placement> = match sel {
        PlacementSel::Both => Placement::ALL.to_vec(),
        PlacementSel::FirstFactor => vec![Placement::FirstFactor],
        PlacementSel::SecondFactor => vec![Placement::SecondFactor],
    };
    let target = pva::nls_table();
    let k = cli.order;
    let mut matching = Vec::new();
    for p in placements.iter().copied() {
        let wt = pva::nls_limit_table(p, check_degree)?;
        if show {
            emit(cli, &format!("{} {}", p.name(), wt.to_json(k)?), json!({"placement": p.name(), "table": wt.to_json(k)?}));
        }
        let mismatches = pva::table_mismatches(&pva::basis_change(&wt), &target, k)?;
        for ((a, b), d) in &mismatches {
            let rec = json!({"check": "limit", "indices": [p.name(), a, b], "defect": d.render(target.names())});
            println!("{rec}");
        }
        let pairs: Vec<String> = mismatches.iter().map(|((a, b), _)| format!("({a},{b})")).collect();
        let text = if pairs.is_empty() {
            format!("{}: matches all four brackets at order {k}", p.name())
        } else {
            format!("{}: mismatch on {}", p.name(), pairs.join(" "))
        };
        emit(cli, &text, json!({"placement": p.name(), "order": k, "mismatches": pairs}));
        if pairs.is_empty() {
            matching.push(p);
        }
    }
    let ok = if sel == PlacementSel::Both { matching.len() == 1 } else { matching.len() == placements.len() };
    let passing: Vec<&str> = matching.iter().map(|p| p.name()).collect();
    let text = format!("passing placement: {}", if passing.is_empty() { "none".into() } else { passing.join(", ") });
    emit(cli, &text, json!({"passing": passing, "pass": ok}));
    Ok(ok)
}

fn parse_matrix(src: &str) -> Result<Vec<Vec<GaussScalar>>, Failure> {
    src.split(';')
        .map(|row| {
            row.split(',')
                .map(|t| {
                    let t = t.trim();
                    pva::parse_scalar(t).map(|d| d.value).ok_or_else(|| Failure::Usage(format!("bad matrix entry {t:?}")))
                })
                .collect()
        })
        .collect()
}

fn gva(cli: &Cli, matrix: &str, labels: Option<&[String]>) -> Outcome {
    let s = parse_matrix(matrix)?;
    let n = s.len();
    if s.iter().any(|r| r.len() != n) {
        return Err(Failure::Usage("matrix must be square".into()));
    }
    let labels: Vec<String> = match labels {
        Some(l) if l.len() == n => l.to_vec(),
        Some(_) => return Err(Failure::Usage("one label per row".into())),
        None => (0..n).map(|i| format!("a{i}")).collect(),
    };
    let data = logva::gva_extract(&labels, &s).map_err(|e| Failure::Usage(e.to_string()))?;
    match cli.format {
        Format::Json => println!("{}", serde_json::to_string(&data)?),
        Format::Text => {
            for (c, members) in data.classes.iter().enumerate() {
                let names: Vec<&str> = members.iter().map(|m| data.labels[*m].as_str()).collect();
                println!("I{c} = {{{}}}", names.join(", "));
            }
            for (i, row) in data.delta.iter().enumerate() {
                for (j, d) in row.iter().enumerate() {
                    println!("Delta(I{i}, I{j}) = {d} mod Z, eta = {}", data.eta[i][j]);
                }
            }
            for p in &data.partial {
                println!("partial: {p} has no representative");
            }
        }
    }
    Ok(true)
}

fn oracle_check(cli: &Cli) -> Outcome {
    let nls = nls_for(cli.instance)?;
    let oracle = Oracle::build_with(nls.deformed(), nls.mixed(), cli.degree + cli.window)?;
    let defects = oracle.equivalence_sweep(&nls, cli.window, cli.degree)?;
    for d in &defects {
        println!("{}", serde_json::to_string(d)?);
    }
    let ok = defects.is_empty();
    let text = format!("oracle-equivalence: {} defects\n{}", defects.len(), if ok { "PASS" } else { "FAIL" });
    emit(cli, &text, json!({"summary": {"oracle-equivalence": {"defects": defects.len()}}, "pass": ok, "seed": cli.seed}));
    Ok(ok)
}
