use fwdre_core::config::ModelConfig;
use fwdre_core::forward::PenalizerSpec;
use fwdre_core::market::ClaimSizeDist;
use fwdre_core::presets;

const FULL: &str = r#"
[factor]
alpha = { kind = "affine", c0 = 0.2, c1 = -1.0 }
beta = { kind = "constant", value = 0.1 }
y0 = -0.2

[stock]
mu = { kind = "constant", value = 0.08 }
sigma = { kind = "tabulated", y = [-1.0, 1.0], values = [0.2, 0.3] }
s0 = 2.0

[claims]
intensity = { kind = "exponential", scale = 1.5, rate = 0.5 }
dist = { kind = "tabulated", z = [0.0, 1.0, 2.0], density = [0.0, 1.0, 0.0] }

[correlation]
rho = 0.3
rho_s = -0.2
rho_y = 0.1

[risk]
gamma = 0.4
x0 = 3.0

[premium]
kind = "variance"
delta_i = 0.1
delta_r = 0.2

[penalizer]
kind = "h4_affine"
kbar = 0.25

[backward]
horizon = 2.0
fk_paths = 500

[sim]
dt = 0.01
n_paths = 123
seed = 42
"#;

#[test]
fn every_section_parses() {
    let c = ModelConfig::from_toml_str(FULL).unwrap();
    assert_eq!(c.penalizer, PenalizerSpec::H4Affine { kbar: 0.25 });
    assert_eq!(
        (c.backward.horizon, c.backward.fk_paths, c.backward.dt),
        (2.0, 500, 1e-4)
    );
    assert_eq!((c.sim.n_paths, c.sim.seed, c.sim.batches), (123, 42, 100));
    assert_eq!((c.risk.x0, c.risk.r0), (3.0, 1.0));
    assert!(matches!(c.claims.dist, ClaimSizeDist::Tabulated(_)));
    let m = c.market().unwrap();
    assert!((m.sigma(0.0, 0.0) - 0.25).abs() < 1e-15);
    assert!((m.lambda(0.0, 2.0) - 1.5 * 1f64.exp()).abs() < 1e-12);
    assert!((m.dist().mean() - 1.0).abs() < 1e-10);
    let back = ModelConfig::from_toml_str(&c.to_toml_string().unwrap()).unwrap();
    assert_eq!(back, c);
}

#[test]
fn presets_round_trip() {
    for c in [
        presets::exponential_intensity(presets::LARGE_CLAIMS, 0.3, 0.5),
        presets::quadratic_intensity(0.4),
        presets::quadratic_intensity_small_claims(0.0),
    ] {
        let s = c.to_toml_string().unwrap();
        assert_eq!(ModelConfig::from_toml_str(&s).unwrap(), c);
    }
}

#[test]
fn malformed_configs_are_config_errors() {
    let cases = [
        FULL.replace("gamma = 0.4", "gamma = \"high\""),
        FULL.replace("[sim]", "[sim]\nbogus = 1"),
        FULL.replace("kind = \"variance\"", "kind = \"mystery\""),
        FULL.replace(
            "intensity = { kind = \"exponential\", scale = 1.5, rate = 0.5 }",
            "",
        ),
    ];
    for src in &cases {
        let e = ModelConfig::from_toml_str(src).and_then(|c| c.market().map(|_| c));
        assert!(e.as_ref().is_err_and(|e| e.is_config()), "{e:?}");
    }
    // Both intensity forms at once.
    let both = FULL.replace("[claims]", "[claims]\nk = 1.0");
    assert!(ModelConfig::from_toml_str(&both)
        .unwrap()
        .market()
        .unwrap_err()
        .is_config());
    // Inconsistent correlations.
    let bad = FULL
        .replace("rho = 0.3", "rho = 0.9")
        .replace("rho_s = -0.2", "rho_s = 0.9")
        .replace("rho_y = 0.1", "rho_y = -0.9");
    assert!(ModelConfig::from_toml_str(&bad)
        .unwrap()
        .market()
        .unwrap_err()
        .is_config());
}
