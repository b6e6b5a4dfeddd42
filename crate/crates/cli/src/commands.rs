use std::path::Path;

use rfphate::data::{csv_field, format_number, write_file};
use rfphate::embed::run_rf_phate;
use rfphate::eval::{
    knn_cv_score_with, robustness_sweep, run_noise_experiment, write_reports_csv, CvOptions, Target,
};
use rfphate::forest::{grouped_permutation_importance, train_forest, Importance};
use rfphate::{
    load_csv, preprocess, Dataset, Embedding, Error, ForestParams, LabelVector, MissingPolicy, Mtry,
    PotentialTransform, RandomSeed, Result, RfPhateParams, TargetScale, TaskHint, VariableValues,
};

use crate::args::{
    DataArgs, DiffusionArgs, EmbedArgs, EvaluateArgs, ForestArgs, ImportanceArgs, MissingArg, MtryArg, NoiseArgs,
    ScaleArg, SweepArgs, TArg, TaskArg, TransformArg,
};
use crate::plot::{scatter_svg, Coloring};

const TOP_IMPORTANCES: usize = 5;

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}

/// The output's directory must exist before any work starts.
fn check_writable(path: &Path) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    if !dir.is_dir() {
        return Err(Error::Io {
            path: path.to_path_buf(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "directory does not exist"),
        });
    }
    if path.is_dir() {
        return Err(Error::Io {
            path: path.to_path_buf(),
            source: std::io::Error::new(std::io::ErrorKind::IsADirectory, "output path is a directory"),
        });
    }
    Ok(())
}

fn check_input(path: &Path) -> Result<()> {
    if !path.is_file() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    Ok(())
}

fn validate_forest(f: &ForestArgs) -> Result<()> {
    if f.trees == 0 {
        return Err(invalid("--trees must be at least 1"));
    }
    if f.mtry == MtryArg::Fixed(0) {
        return Err(invalid("--mtry must be at least 1"));
    }
    if f.min_node_size == Some(0) {
        return Err(invalid("--min-node-size must be at least 1"));
    }
    Ok(())
}

fn validate_diffusion(d: &DiffusionArgs) -> Result<()> {
    if d.dims == 0 {
        return Err(invalid("--dims must be at least 1"));
    }
    if d.t == TArg::Fixed(0) {
        return Err(invalid("--t must be at least 1"));
    }
    if d.t == TArg::Auto && d.t_max < 3 {
        return Err(invalid("--t-max must be at least 3 when t is chosen automatically"));
    }
    if d.t_max == 0 {
        return Err(invalid("--t-max must be at least 1"));
    }
    if !(d.eps > 0.0 && d.eps.is_finite()) {
        return Err(invalid(format!("--eps must be positive, got {}", d.eps)));
    }
    Ok(())
}

fn load(data: &DataArgs) -> Result<(Dataset, LabelVector)> {
    let hint = match data.task {
        TaskArg::Auto => TaskHint::Auto,
        TaskArg::Classification => TaskHint::Classification,
        TaskArg::Regression => TaskHint::Regression,
    };
    let policy = match data.missing {
        MissingArg::Drop => MissingPolicy::DropRows,
        MissingArg::Impute => MissingPolicy::ImputeZeroNone,
    };
    let (raw, y) = load_csv(&data.input, &data.label, hint)?;
    let (ds, y) = preprocess(&raw, &y, policy)?;
    log::info!("loaded {} rows, {} encoded features", ds.n(), ds.p());
    Ok((ds, y))
}

fn master(seed: u64) -> RandomSeed {
    RandomSeed(seed)
}

fn forest_params(f: &ForestArgs) -> ForestParams {
    ForestParams {
        n_trees: f.trees,
        mtry: match f.mtry {
            MtryArg::Auto => Mtry::Auto,
            MtryArg::SqrtN => Mtry::Observations,
            MtryArg::Fixed(m) => Mtry::Fixed(m),
        },
        min_node_size: f.min_node_size,
        seed: master(f.seed).derive("forest", 0),
    }
}

fn pipeline_params(f: &ForestArgs, d: &DiffusionArgs) -> RfPhateParams {
    RfPhateParams {
        m: d.dims,
        forest: forest_params(f),
        t: match d.t {
            TArg::Auto => None,
            TArg::Fixed(t) => Some(t),
        },
        t_max: d.t_max,
        transform: match d.transform {
            TransformArg::Log => PotentialTransform::Log { eps: d.eps },
            TransformArg::Sqrt => PotentialTransform::Sqrt,
        },
        ..Default::default()
    }
}

fn scale(s: ScaleArg) -> TargetScale {
    match s {
        ScaleArg::Standardized => TargetScale::Standardized,
        ScaleArg::Raw => TargetScale::Raw,
    }
}

fn target(ds: &Dataset, y: &LabelVector, label: &str, name: &str, scale: TargetScale) -> Result<Target> {
    if name == label {
        return Ok(Target::from_labels(name, y, scale));
    }
    Target::from_variable(ds, name, None, scale)
}

fn importance(forest: &rfphate::Forest, ds: &Dataset, y: &LabelVector, seed: u64) -> Result<Importance> {
    grouped_permutation_importance(forest, ds, y, master(seed).derive("importance", 0))
}

fn print_importances(imp: &Importance) {
    println!("top importances:");
    for (name, value) in imp.top(TOP_IMPORTANCES) {
        println!("  {name:<20} {value:.4}");
    }
}

/// Source-scale values of a variable as CSV text and as a plot colouring.
fn column_of(ds: &Dataset, y: &LabelVector, label: &str, name: &str) -> Result<(Vec<String>, Coloring)> {
    if name == label {
        let text = (0..y.len()).map(|i| y.display(i)).collect();
        let coloring = match y {
            LabelVector::Classification { classes, class_names } => Coloring::Categorical {
                codes: classes.clone(),
                levels: class_names.clone(),
            },
            LabelVector::Regression(v) => Coloring::Continuous { values: v.clone() },
        };
        return Ok((text, coloring));
    }
    let var = ds.variable(name).ok_or_else(|| Error::MissingColumn(name.to_string()))?;
    Ok(match &var.values {
        VariableValues::Categorical { codes, levels } => (
            codes.iter().map(|&c| levels[c].clone()).collect(),
            Coloring::Categorical {
                codes: codes.clone(),
                levels: levels.clone(),
            },
        ),
        VariableValues::Continuous(v) => (
            v.iter().map(|&x| format_number(x)).collect(),
            Coloring::Continuous { values: v.clone() },
        ),
    })
}

pub fn embed(args: &EmbedArgs) -> Result<()> {
    validate_forest(&args.forest)?;
    validate_diffusion(&args.diffusion)?;
    check_input(&args.data.input)?;
    check_writable(&args.output)?;
    if let Some(plot) = &args.plot {
        check_writable(plot)?;
    }
    let (ds, y) = load(&args.data)?;
    let label = args.data.label.as_str();
    let color_name = args.color_by.as_deref().unwrap_or(label);
    let (color_text, coloring) = column_of(&ds, &y, label, color_name)?;

    let params = pipeline_params(&args.forest, &args.diffusion);
    let out = run_rf_phate(&ds, &y, &params)?;
    let oob = out.forest.oob_error(&ds, &y)?;
    let imp = importance(&out.forest, &ds, &y, args.forest.seed)?;

    let extra: Vec<(&str, Vec<String>)> = if color_name == label {
        Vec::new()
    } else {
        vec![(color_name, color_text)]
    };
    out.embedding.write_csv(&args.output, Some((label, &y)), &extra)?;
    if let Some(plot) = &args.plot {
        write_file(plot, scatter_svg(&out.embedding, &coloring, color_name).as_bytes())?;
    }

    let how = if params.t.is_some() { "fixed" } else { "entropy knee" };
    println!("t = {} ({how})", out.diffusion.t);
    match y {
        LabelVector::Classification { .. } => println!("OOB accuracy = {:.4}", 1.0 - oob.error),
        LabelVector::Regression(_) => println!("OOB mse = {:.4}", oob.error),
    }
    print_importances(&imp);
    for w in &out.warnings {
        eprintln!("warning: {w}");
    }
    println!("wrote {}", args.output.display());
    if let Some(plot) = &args.plot {
        println!("wrote {}", plot.display());
    }
    Ok(())
}

pub fn evaluate(args: &EvaluateArgs) -> Result<()> {
    check_input(&args.data.input)?;
    check_input(&args.embedding)?;
    if let Some(report) = &args.report {
        check_writable(report)?;
    }
    let (ds, y) = load(&args.data)?;
    let emb = Embedding::read_csv(&args.embedding)?;
    if emb.n() != ds.n() {
        return Err(Error::RowCountMismatch {
            what: format!("embedding {}", args.embedding.display()),
            expected: ds.n(),
            found: emb.n(),
        });
    }
    let names: Vec<String> = if args.vars.is_empty() {
        ds.variables.iter().map(|v| v.name.clone()).collect()
    } else {
        args.vars.iter().map(|v| v.trim().to_string()).collect()
    };
    let scale = scale(args.score.target_scale);
    let targets = names
        .iter()
        .map(|name| target(&ds, &y, &args.data.label, name, scale))
        .collect::<Result<Vec<_>>>()?;
    let opts = CvOptions {
        stratified: args.score.stratified,
        ..Default::default()
    };
    let fold_seed = master(args.seed).derive("folds", 0);
    let reports = targets
        .iter()
        .map(|t| knn_cv_score_with(&emb, t, fold_seed, &opts))
        .collect::<Result<Vec<_>>>()?;
    for r in &reports {
        println!("{:<20} {:<10} {:.4} ± {:.4} (k = {})", r.variable, r.metric, r.score, r.sd, r.k_used);
    }
    if let Some(path) = &args.report {
        write_reports_csv(&reports, path)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn around(centre: usize, lo: usize, hi: usize) -> Vec<usize> {
    (centre.saturating_sub(2)..=centre + 2).filter(|v| (lo..=hi).contains(v)).collect()
}

pub fn sweep(args: &SweepArgs) -> Result<()> {
    validate_forest(&args.forest)?;
    validate_diffusion(&args.diffusion)?;
    check_input(&args.data.input)?;
    check_writable(&args.output)?;
    if args.mtry_values.contains(&0) || args.t_values.contains(&0) {
        return Err(invalid("grid values must be at least 1"));
    }
    let (ds, y) = load(&args.data)?;
    let params = pipeline_params(&args.forest, &args.diffusion);
    let scale = scale(args.target_scale);

    let needs_base = args.mtry_values.is_empty() || args.t_values.is_empty() || args.target.is_none();
    let (mtry_values, t_values, target_name) = if needs_base {
        let base = run_rf_phate(&ds, &y, &params)?;
        let mtry_values = if args.mtry_values.is_empty() {
            around(base.forest.mtry, 1, ds.p())
        } else {
            args.mtry_values.clone()
        };
        let t_values = if args.t_values.is_empty() {
            around(base.diffusion.t, 1, usize::MAX)
        } else {
            args.t_values.clone()
        };
        let target_name = match &args.target {
            Some(t) => t.clone(),
            None => {
                let imp = importance(&base.forest, &ds, &y, args.forest.seed)?;
                imp.names[imp.ranking()[0]].clone()
            }
        };
        (mtry_values, t_values, target_name)
    } else {
        (args.mtry_values.clone(), args.t_values.clone(), args.target.clone().unwrap_or_default())
    };
    let t = target(&ds, &y, &args.data.label, &target_name, scale)?;
    let fold_seed = master(args.forest.seed).derive("folds", 0);
    let grid = robustness_sweep(&ds, &y, &params, &mtry_values, &t_values, &t, fold_seed)?;
    grid.write_csv(&args.output)?;

    println!("target = {target_name} ({})", grid.metric);
    let header: Vec<String> = grid.t_values.iter().map(|t| format!("t={t:<6}")).collect();
    println!("{:<8} {}", "mtry", header.join(" "));
    for (m, row) in grid.mtry_values.iter().zip(&grid.scores) {
        let cells: Vec<String> = row.iter().map(|s| format!("{s:<8.4}")).collect();
        println!("{m:<8} {}", cells.join(" "));
    }
    println!("spread = {:.4}", grid.spread());
    println!("wrote {}", args.output.display());
    Ok(())
}

pub fn noise(args: &NoiseArgs) -> Result<()> {
    validate_forest(&args.forest)?;
    validate_diffusion(&args.diffusion)?;
    if args.repeats == 0 {
        return Err(invalid("--repeats must be at least 1"));
    }
    check_input(&args.data.input)?;
    check_writable(&args.report)?;
    let (ds, y) = load(&args.data)?;
    let params = pipeline_params(&args.forest, &args.diffusion);
    let report = run_noise_experiment(
        &ds,
        &y,
        args.q,
        &params,
        args.repeats,
        master(args.forest.seed),
        scale(args.target_scale),
    )?;
    for r in &report.summary {
        println!("{:<20} {:<10} {:.4} ± {:.4}", r.variable, r.metric, r.score, r.sd);
    }
    write_reports_csv(&report.summary, &args.report)?;
    println!("wrote {}", args.report.display());
    Ok(())
}

pub fn importance_cmd(args: &ImportanceArgs) -> Result<()> {
    validate_forest(&args.forest)?;
    check_input(&args.data.input)?;
    check_writable(&args.output)?;
    let (ds, y) = load(&args.data)?;
    let forest = train_forest(&ds, &y, &forest_params(&args.forest))?;
    let imp = importance(&forest, &ds, &y, args.forest.seed)?;
    let mut out = String::from("rank,variable,importance,std_error\n");
    for (rank, i) in imp.ranking().into_iter().enumerate() {
        out.push_str(&format!(
            "{},{},{},{}\n",
            rank + 1,
            csv_field(&imp.names[i]),
            format_number(imp.mean[i]),
            format_number(imp.std_error[i])
        ));
    }
    write_file(&args.output, out.as_bytes())?;
    print_importances(&imp);
    println!("wrote {}", args.output.display());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_defaults_stay_in_range() {
        assert_eq!(around(1, 1, 10), vec![1, 2, 3]);
        assert_eq!(around(3, 1, 4), vec![1, 2, 3, 4]);
        assert_eq!(around(12, 1, usize::MAX), vec![10, 11, 12, 13, 14]);
    }

    #[test]
    fn missing_output_directory_is_rejected() {
        assert!(check_writable(Path::new("/definitely/not/here/out.csv")).is_err());
        assert!(check_writable(Path::new("out.csv")).is_ok());
        assert!(check_writable(Path::new("/tmp")).is_err());
    }
}
