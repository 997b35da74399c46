use onsager_flow::ericksen_leslie::Defect;
use onsager_flow::grid::Boundary;
use onsager_flow_cli::config::*;

const COARSENING: &str = "\
model.kind = chns
grid.nx = 64
grid.ny = 64
time.dt = 0.005
time.t_end = 10
initial.preset = coarsening
";

fn err(text: &str) -> ConfigError {
    parse_config(text).unwrap_err()
}

#[test]
fn minimal_config_fills_defaults() {
    let cfg = parse_config(COARSENING).unwrap();
    assert_eq!(cfg.model, ModelKind::Chns);
    assert_eq!(cfg.scheme, Scheme::Cn);
    assert_eq!(cfg.grid.bc_y(), Boundary::Wall);
    let echo = cfg.echo();
    for line in ["params.rho = 1.0", "params.eta = 1.0", "params.eps = 0.01", "params.gamma0 = 0.0", "grid.lx = 1.0"] {
        assert!(echo.lines().any(|l| l == line), "missing `{line}` in\n{echo}");
    }
}

#[test]
fn echo_parses_back_to_the_same_config() {
    let cfg = parse_config(COARSENING).unwrap();
    assert_eq!(parse_config(&cfg.echo()).unwrap(), cfg);
    let el = "model.kind = el\ngrid.nx = 8\ngrid.ny = 8\ntime.dt = 0.1\ntime.t_end = 0.1\n\
              initial.preset = defects\ninitial.defects = 0.5:0.3:1, 0.5:0.7:-1\ninitial.core_radius = 0.1\n";
    let cfg = parse_config(el).unwrap();
    assert_eq!(
        cfg.initial.defects,
        Some(vec![Defect { x: 0.5, y: 0.3, charge: 1.0 }, Defect { x: 0.5, y: 0.7, charge: -1.0 }])
    );
    assert_eq!(parse_config(&cfg.echo()).unwrap(), cfg);
}

#[test]
fn section_headers_qualify_keys() {
    let text = "# comment\n; another\n[model]\nkind = chns   # inline\n[grid]\nnx = 64\nny = 64\n[time]\ndt = 0.005\nt_end = 10\n\
                [initial]\npreset = coarsening ; inline\n";
    assert_eq!(parse_config(text).unwrap(), parse_config(COARSENING).unwrap());
    let text = "[model]\nkind = chns\n[grid]\nnx = 64\nny = 64\n[time]\ndt = 0.005\nt_end = 10\n\
                [initial]\npreset = coarsening\n";
    assert_eq!(parse_config(text).unwrap(), parse_config(COARSENING).unwrap());
}

#[test]
fn empty_text_lists_required_keys() {
    match err("") {
        ConfigError::Missing(keys) => {
            assert_eq!(keys, ["model.kind", "grid.nx", "grid.ny", "time.dt", "time.t_end", "initial.preset"]);
        }
        other => panic!("{other:?}"),
    }
    assert!(err("").to_string().contains("time.dt"));
}

#[test]
fn negative_dt_names_the_key() {
    let e = err(&COARSENING.replace("time.dt = 0.005", "time.dt = -0.1"));
    assert!(matches!(&e, ConfigError::Invalid { key, line: 4, .. } if key == "time.dt"), "{e:?}");
    assert!(e.to_string().contains("time.dt"));
}

#[test]
fn t_end_below_dt_is_rejected() {
    let e = err(&COARSENING.replace("time.t_end = 10", "time.t_end = 0.001"));
    assert!(matches!(e, ConfigError::Invalid { ref key, .. } if key == "time.t_end"));
}

#[test]
fn unknown_key_names_key_and_line() {
    let e = err(&format!("{COARSENING}grid.nz = 4\n"));
    assert_eq!(e, ConfigError::UnknownKey { line: 7, key: "grid.nz".into() });
    // model-specific keys are unknown to the other model
    let e = err(&format!("{COARSENING}params.k_frank = 0.1\n"));
    assert!(matches!(e, ConfigError::UnknownKey { line: 7, .. }));
}

#[test]
fn type_mismatch_names_key_and_line() {
    let e = err(&COARSENING.replace("grid.nx = 64", "grid.nx = sixty"));
    assert!(matches!(&e, ConfigError::Type { key, line: 2, .. } if key == "grid.nx"), "{e:?}");
    let e = err(&COARSENING.replace("model.kind = chns", "model.kind = stokes"));
    assert!(e.to_string().contains("one of chns, el"), "{e}");
}

#[test]
fn syntax_and_duplicates_are_reported() {
    assert!(matches!(err("model.kind chns\n"), ConfigError::Syntax { line: 1, .. }));
    let e = err(&format!("{COARSENING}time.dt = 0.01\n"));
    assert_eq!(e, ConfigError::Duplicate { line: 7, key: "time.dt".into(), first: 4 });
}

#[test]
fn parameter_validation_names_the_key() {
    let e = err(&format!("{COARSENING}params.eps = 0\n"));
    assert!(matches!(e, ConfigError::Invalid { ref key, line: 7, .. } if key == "params.eps"), "{e:?}");
    let e = err(&format!("{COARSENING}solver.max_iter = 0\n"));
    assert!(matches!(e, ConfigError::Invalid { .. }));
}

#[test]
fn presets_must_match_the_model() {
    let e = err(&COARSENING.replace("preset = coarsening", "preset = defects"));
    assert!(matches!(e, ConfigError::Invalid { ref key, .. } if key == "initial.preset"));
    let eq = COARSENING.replace("preset = coarsening", "preset = equilibrium");
    assert!(parse_config(&eq).is_ok());
    assert!(parse_config(&eq.replace("kind = chns", "kind = el")).is_ok());
}

#[test]
fn shipped_presets_parse() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../presets");
    let mut names: Vec<String> = Vec::new();
    for entry in std::fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "ini") {
            let text = std::fs::read_to_string(&path).unwrap();
            parse_config(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            names.push(path.file_stem().unwrap().to_string_lossy().into());
        }
    }
    names.sort();
    assert_eq!(names, ["chns-convergence", "coarsening", "el-convergence", "el-defects", "equilibrium", "ostwald"]);
    let ostwald = parse_config(&std::fs::read_to_string(dir.join("ostwald.ini")).unwrap()).unwrap();
    match ostwald.params {
        ModelParams::Chns(p) => assert_eq!((p.rho, p.eta, p.eps, p.relax_time), (1.0, 1.0, 0.01, 100.0)),
        _ => panic!(),
    }
    assert_eq!((ostwald.dt, ostwald.grid.lx(), ostwald.grid.ly()), (0.005, 1.0, 1.0));
}
