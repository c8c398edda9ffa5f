use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use flatcirc_core::correlators::{
    b_from_correlators, b_from_structure, correlators_from_b, master_equation_residual,
    structure_from_b, CorrelatorFamily,
};
use flatcirc_core::duality::dual_structure;
use flatcirc_core::euler::h_from_e;
use flatcirc_core::expr::parse_constant;
use flatcirc_core::geometry::{Connection, VectorField};
use flatcirc_core::model::{structure_document, Model, Overrides};
use flatcirc_core::permutofan::{enumerate_partitions, max_n_from_env, verify_fan};
use flatcirc_core::suite::{run_check_suite, Report};

#[derive(Parser)]
#[command(
    name = "flatcirc",
    version,
    about = "Exact residual checks for F-manifolds with flat structure"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(clap::Args)]
struct ModelArgs {
    /// Model file (JSON, schemaVersion 1).
    model: PathBuf,
    /// Degree cap of the structure tensor.
    #[arg(long)]
    order: Option<u32>,
    /// Highest power of mu kept in parameter series.
    #[arg(long = "mu-order")]
    mu_order: Option<usize>,
    /// Shift of the base connection along the pencil, e.g. 1/2.
    #[arg(long, allow_hyphen_values = true)]
    lambda0: Option<String>,
}

impl ModelArgs {
    fn load(&self) -> Result<Model> {
        let text = fs::read_to_string(&self.model)
            .with_context(|| format!("reading {}", self.model.display()))?;
        let lambda0 = self
            .lambda0
            .as_deref()
            .map(parse_constant)
            .transpose()
            .context("--lambda0")?;
        let overrides = Overrides {
            order: self.order,
            mu_order: self.mu_order,
            lambda0,
        };
        Model::load(&text, &overrides).with_context(|| format!("loading {}", self.model.display()))
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run the residual suite on a model.
    Check {
        #[command(flatten)]
        args: ModelArgs,
        /// Write the report here instead of standard output.
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
        /// Comma-separated check ids or id prefixes (e.g. "pencil,hm-identity").
        #[arg(long, value_delimiter = ',')]
        only: Option<Vec<String>>,
    },
    /// Twist the multiplication by an invertible field and write the dual model.
    Dualize {
        #[command(flatten)]
        args: ModelArgs,
        /// A field of the model (identity, euler, epsilon, primitive) or
        /// `;`-separated component expressions.
        #[arg(long, allow_hyphen_values = true)]
        epsilon: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build the mu-dependent operator H from the Euler field and check the
    /// extended connection.
    Extend {
        #[command(flatten)]
        args: ModelArgs,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
    /// Enumerate or verify the permutohedral fan.
    Fan {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        verify: bool,
        /// Print every ordered partition.
        #[arg(long)]
        list: bool,
    },
    /// Extract top correlators from a model, or rebuild B from a correlator file.
    Correlators {
        /// Model file; omit when using --from.
        model: Option<PathBuf>,
        #[arg(long)]
        order: Option<u32>,
        /// Largest correlator size extracted.
        #[arg(long)]
        cap: Option<u32>,
        /// Correlator family file to rebuild B from.
        #[arg(long, conflicts_with = "model")]
        from: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn write_or_print(path: Option<&Path>, content: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, content).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn render(report: &Report, format: Format) -> String {
    match format {
        Format::Json => report.to_json(),
        Format::Text => report.to_text(),
    }
}

fn check(
    args: &ModelArgs,
    report: Option<&Path>,
    format: Format,
    only: Option<&[String]>,
) -> Result<bool> {
    let model = args.load()?;
    let rep = run_check_suite(&model, only)?;
    write_or_print(report, &render(&rep, format))?;
    if report.is_some() {
        eprintln!(
            "{}: {} pass, {} fail, {} skipped",
            rep.model, rep.summary.pass, rep.summary.fail, rep.summary.skipped
        );
    }
    Ok(rep.passed())
}

fn pick_field(model: &Model, spec: &str) -> Result<VectorField> {
    let named = match spec {
        "identity" => Some(model.structure.identity().cloned()),
        "euler" => Some(model.euler.as_ref().map(|(f, _)| f.clone())),
        "epsilon" => Some(model.epsilon.clone()),
        "primitive" => Some(model.primitive.clone()),
        _ => None,
    };
    match named {
        Some(Some(v)) => Ok(v),
        Some(None) => bail!("model declares no {spec} field"),
        None => Ok(model.parse_field(spec)?),
    }
}

fn dualize(args: &ModelArgs, epsilon: &str, out: &Path) -> Result<bool> {
    let model = args.load()?;
    let eps = pick_field(&model, epsilon)?;
    let pair = dual_structure(&model.structure, &eps)?;
    let doc = structure_document(
        &format!("{}-dual", model.name),
        &model.names,
        pair.dual.order(),
        model.mu_order,
        &pair.dual,
    );
    fs::write(out, doc.to_json()).with_context(|| format!("writing {}", out.display()))?;
    let ok = pair.identity_residual()?.vanishes() && pair.double_twist_residual()?.vanishes();
    eprintln!(
        "wrote {}; identity and double-twist residuals vanish: {ok}",
        out.display()
    );
    Ok(ok)
}

fn extend(args: &ModelArgs, format: Format) -> Result<bool> {
    let model = args.load()?;
    let (field, _) = model
        .euler
        .as_ref()
        .ok_or_else(|| anyhow!("model declares no Euler field"))?;
    let f = &model.structure;
    let e = f.require_identity()?;
    let base = f.shift_base(&Connection::flat_frame(f.dim(), f.order()), &model.lambda0)?;
    let e1 = base.covariant_derivative(e, e)?;
    let big_e = flatcirc_core::euler::MuSeriesVF::constant(field, model.mu_order);
    let h = h_from_e(f, &base, &big_e, &e1)?;
    let only: Vec<String> = vec!["extended".into()];
    let rep = run_check_suite(&model, Some(&only))?;
    let n = f.dim();
    let coeffs: Vec<Vec<Vec<String>>> = (0..=h.mu_cap())
        .map(|i| {
            (0..n)
                .map(|row| {
                    (0..n)
                        .map(|col| h.coeff(i).get(row, col).to_expression_with(&model.names))
                        .collect()
                })
                .collect()
        })
        .collect();
    let out = match format {
        Format::Json => {
            let doc = json!({
                "model": model.name,
                "muOrder": model.mu_order,
                "h": coeffs,
                "checks": rep.checks,
            });
            format!("{}\n", serde_json::to_string_pretty(&doc)?)
        }
        Format::Text => {
            let mut s = String::new();
            for (i, m) in coeffs.iter().enumerate() {
                s.push_str(&format!("H_{i}:\n"));
                for row in m {
                    s.push_str(&format!("  [{}]\n", row.join(", ")));
                }
            }
            s + &rep.to_text()
        }
    };
    print!("{out}");
    Ok(rep.passed())
}

fn fan(n: usize, verify: bool, list: bool) -> Result<bool> {
    let max = max_n_from_env();
    if n > max {
        return Err(flatcirc_core::Error::FanTooLarge { n, max }.into());
    }
    if list {
        for p in enumerate_partitions(n) {
            println!("{p}");
        }
    }
    if verify || !list {
        let r = verify_fan(n, max)?;
        println!(
            "n={} cones={} rays={} maximal={} unimodular={} complete={} face_closed={}",
            r.n,
            r.cone_count,
            r.ray_count,
            r.max_cone_count,
            r.unimodular,
            r.complete,
            r.face_closed
        );
        return Ok(!verify || r.passes());
    }
    Ok(true)
}

fn correlators(
    model: Option<&Path>,
    order: Option<u32>,
    cap: Option<u32>,
    from: Option<&Path>,
    out: Option<&Path>,
) -> Result<bool> {
    if let Some(path) = from {
        let text =
            fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let value: serde_json::Value = serde_json::from_str(&text)?;
        let family = CorrelatorFamily::from_json(&value)?;
        let b = b_from_correlators(&family)?;
        let residual = master_equation_residual(&b)?;
        let offense = residual.first_offense();
        let f = structure_from_b(&b)?;
        let doc = json!({
            "dimension": family.dim(),
            "cap": family.cap(),
            "masterEquation": offense.as_ref().map_or("pass".to_string(), |o| format!("fail: {o}")),
            "identityFound": f.identity().is_some(),
        });
        write_or_print(out, &format!("{}\n", serde_json::to_string_pretty(&doc)?))?;
        return Ok(offense.is_none());
    }
    let path = model.ok_or_else(|| anyhow!("give a model file or --from"))?;
    let args = ModelArgs {
        model: path.to_path_buf(),
        order,
        mu_order: None,
        lambda0: None,
    };
    let m = args.load()?;
    let b = b_from_structure(&m.structure)?;
    let b = match cap {
        Some(c) if c < b.valid_to() => {
            flatcirc_core::correlators::BMatrix::new(b.field().truncate(c))?
        }
        _ => b,
    };
    let ex = correlators_from_b(&b, false)?;
    write_or_print(
        out,
        &format!("{}\n", serde_json::to_string_pretty(&ex.family.to_json())?),
    )?;
    Ok(true)
}

fn run(cli: Cli) -> Result<bool> {
    match &cli.command {
        Command::Check {
            args,
            report,
            format,
            only,
        } => check(args, report.as_deref(), *format, only.as_deref()),
        Command::Dualize { args, epsilon, out } => dualize(args, epsilon, out),
        Command::Extend { args, format } => extend(args, *format),
        Command::Fan { n, verify, list } => fan(*n, *verify, *list),
        Command::Correlators {
            model,
            order,
            cap,
            from,
            out,
        } => correlators(
            model.as_deref(),
            *order,
            *cap,
            from.as_deref(),
            out.as_deref(),
        ),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn models() -> PathBuf {
        Path::new(env!("CARGO_MANIFEST_DIR")).join("../../models")
    }

    fn model(name: &str) -> String {
        models().join(format!("{name}.json")).display().to_string()
    }

    fn invoke(args: &[&str]) -> Result<bool> {
        let argv = std::iter::once("flatcirc").chain(args.iter().copied());
        run(Cli::try_parse_from(argv)?)
    }

    #[test]
    fn text_report_matches_golden() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("one-dim.txt");
        let ok = invoke(&[
            "check",
            &model("one-dim"),
            "--report",
            out.to_str().unwrap(),
        ])
        .unwrap();
        assert!(ok);
        assert_eq!(
            fs::read_to_string(out).unwrap(),
            include_str!("../tests/golden/one-dim.txt")
        );
    }

    #[test]
    fn failing_report_matches_golden() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("broken.json");
        let args = [
            "check",
            &model("broken-assoc"),
            "--format",
            "json",
            "--report",
            out.to_str().unwrap(),
        ];
        assert!(!invoke(&args).unwrap());
        assert_eq!(
            fs::read_to_string(out).unwrap(),
            include_str!("../tests/golden/broken-assoc.json")
        );
    }

    #[test]
    fn selection_limits_the_checks() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("r.json");
        let args = [
            "check",
            &model("broken-assoc"),
            "--only",
            "pencil.r1,d-symmetry",
            "--format",
            "json",
            "--report",
            out.to_str().unwrap(),
        ];
        assert!(invoke(&args).unwrap());
        let report: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(out).unwrap()).unwrap();
        let ids: Vec<&str> = report["checks"]
            .as_array()
            .unwrap()
            .iter()
            .map(|c| c["id"].as_str().unwrap())
            .collect();
        assert_eq!(ids, ["pencil.r1", "d-symmetry"]);
        assert!(invoke(&["check", &model("qc-p1"), "--only", "bogus"]).is_err());
    }

    #[test]
    fn overrides_reach_the_report() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("r.json");
        let args = [
            "check",
            &model("qc-p1"),
            "--order",
            "5",
            "--mu-order",
            "2",
            "--lambda0",
            "-1/3",
            "--only",
            "pencil",
            "--format",
            "json",
            "--report",
            out.to_str().unwrap(),
        ];
        assert!(invoke(&args).unwrap());
        let report: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(out).unwrap()).unwrap();
        assert_eq!(report["order"], 5);
        assert_eq!(report["muOrder"], 2);
        assert_eq!(report["lambda0"], "-1/3");
    }

    #[test]
    fn dual_model_is_written_and_reloads() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("dual.json");
        let args = [
            "dualize",
            &model("one-dim"),
            "--epsilon",
            "epsilon",
            "--out",
            out.to_str().unwrap(),
        ];
        assert!(invoke(&args).unwrap());
        let text = fs::read_to_string(&out).unwrap();
        let dual = Model::load(&text, &Overrides::default()).unwrap();
        assert_eq!(dual.name, "one-dim-dual");
        // x * x = exp(x0) on the one-dimensional model
        let c = dual.structure.structure().get(0, 0, 0);
        let expected =
            flatcirc_core::expr::parse_expression("exp(x0)", &dual.names, dual.order).unwrap();
        assert!((c - &expected).vanishes());
        assert!(invoke(&[
            "dualize",
            &model("nilpotent"),
            "--epsilon",
            "primitive",
            "--out",
            dir.path().join("never.json").to_str().unwrap()
        ])
        .is_err());
        assert!(!dir.path().join("never.json").exists());
    }

    #[test]
    fn correlators_roundtrip_through_files() {
        let dir = tempfile::tempdir().unwrap();
        let fam = dir.path().join("fam.json");
        let back = dir.path().join("back.json");
        let args = [
            "correlators",
            &model("qc-p1"),
            "--cap",
            "4",
            "--out",
            fam.to_str().unwrap(),
        ];
        assert!(invoke(&args).unwrap());
        let v: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(&fam).unwrap()).unwrap();
        assert_eq!(v["cap"], 4);
        assert_eq!(
            v["entries"]["1,1,1"],
            serde_json::json!([["0", "1"], ["0", "0"]])
        );
        let args = [
            "correlators",
            "--from",
            fam.to_str().unwrap(),
            "--out",
            back.to_str().unwrap(),
        ];
        assert!(invoke(&args).unwrap());
        let v: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(&back).unwrap()).unwrap();
        assert_eq!(v["masterEquation"], "pass");
        assert_eq!(v["identityFound"], true);
    }

    #[test]
    fn fan_bound_and_errors() {
        assert!(invoke(&["fan", "--n", "4", "--verify"]).unwrap());
        assert!(invoke(&["fan", "--n", "9"]).is_err());
        assert!(invoke(&["check", "missing.json"]).is_err());
        assert!(invoke(&["extend", &model("nilpotent")]).is_err());
    }

    #[test]
    fn bad_model_reports_the_offset() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.json");
        fs::write(
            &path,
            r#"{"schemaVersion": 1, "name": "bad", "dimension": 1, "order": 4, "potential": ["x0^2/2 +"]}"#,
        )
        .unwrap();
        let err = invoke(&["check", path.to_str().unwrap()]).unwrap_err();
        let text = format!("{err:#}");
        assert!(text.contains("at byte 8"), "{text}");
    }
}
