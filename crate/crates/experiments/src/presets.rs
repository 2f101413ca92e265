//! Built-in experiment configurations.

use crate::config::{ConfigError, ExperimentConfig};

const FIG1: &str = r#"name = "fig1"
description = "GD and AltGD at the theory step 2/(L+mu) against GD at 1/L, matrix factorization"
methods = ["gd", "altgd", "gd-inv-l"]
seeds = { start = 0, count = 10 }

[problem]
kind = "mf"
m = 100
n = 80
rank = 5
sigma1 = 1.0
sigma_r = 0.2

[init]
scheme = "mf-sketch"
d = 10
c_sqrt_d = 50.0

[stop]
eps = 1e-8
max_iters = 100000

[output]
trace_stride = 10
"#;

const FIG1_LNN: &str = r#"name = "fig1-lnn"
description = "GD and AltGD at the theory step 2/(L+mu) against GD at 1/L, two-layer linear network"
methods = ["gd", "altgd", "gd-inv-l"]
seeds = { start = 0, count = 10 }

[problem]
kind = "lnn"
outputs = 100
inputs = 80
samples = 120
data_rank = 5
sigma1 = 1.0
sigma_r = 0.5

[init]
scheme = "lnn-1"
d = 10
c_sqrt_d = 50.0

[stop]
eps = 1e-8
max_iters = 100000

[output]
trace_stride = 10
"#;

const FIG2_MF: &str = r#"name = "fig2-mf"
description = "GD against NAG over the overparameterization level, matrix factorization"
methods = ["gd", "nag"]
seeds = { start = 0, count = 10 }

[problem]
kind = "mf"
m = 100
n = 80
rank = 5
sigma1 = 1.0
sigma_r = 0.2

[init]
scheme = "mf-sketch"
d = 10
c_sqrt_d = 50.0

[stop]
eps = 1e-8
max_iters = 400000

[sweep]
param = "d"
values = [5, 10, 20]

[output]
trace_stride = 10
"#;

const FIG2_LNN: &str = r#"name = "fig2-lnn"
description = "GD against NAG over the overparameterization level, two-layer linear network"
methods = ["gd", "nag"]
seeds = { start = 0, count = 10 }

[problem]
kind = "lnn"
outputs = 100
inputs = 80
samples = 120
data_rank = 5
sigma1 = 1.0
sigma_r = 0.5

[init]
scheme = "lnn-1"
d = 10
c_sqrt_d = 50.0

[stop]
eps = 1e-8
max_iters = 400000

[sweep]
param = "d"
values = [5, 10, 20]

[output]
trace_stride = 10
"#;

const FIG3: &str = r#"name = "fig3"
description = "Measured loss against the predicted linear rate at large scale c = 200 sqrt(d)"
methods = ["gd-inv-l", "gd", "nag"]
seeds = { start = 0, count = 10 }

[problem]
kind = "mf"
m = 100
n = 80
rank = 5
sigma1 = 1.0
sigma_r = 0.1

[init]
scheme = "mf-sketch"
d = 10
c_sqrt_d = 200.0

[stop]
eps = 1e-8
max_iters = 400000

[sweep]
param = "sigma_r"
values = [0.1, 0.01]

[output]
trace_stride = 10
"#;

const FIG4_LARGE: &str = r#"name = "fig4-large"
description = "GD against NAG on a 1200 x 1000 target; spectrum and scale as in the 100 x 80 runs"
methods = ["gd", "nag"]
seeds = { start = 0, count = 10 }

[problem]
kind = "mf"
m = 1200
n = 1000
rank = 5
sigma1 = 1.0
sigma_r = 0.2

[init]
scheme = "mf-sketch"
d = 10
c_sqrt_d = 50.0

[stop]
eps = 1e-8
max_iters = 400000

[sweep]
param = "d"
values = [5, 10, 20]

[diagnostics]
mode = "sampled"
cadence = 10

[output]
trace_stride = 10
"#;

const FIG4_LARGE_LNN: &str = r#"name = "fig4-large-lnn"
description = "GD against NAG on a 500 x 400 network with 600 samples"
methods = ["gd", "nag"]
seeds = { start = 0, count = 10 }

[problem]
kind = "lnn"
outputs = 500
inputs = 400
samples = 600
data_rank = 5
sigma1 = 1.0
sigma_r = 0.5

[init]
scheme = "lnn-1"
d = 10
c_sqrt_d = 50.0

[stop]
eps = 1e-8
max_iters = 400000

[sweep]
param = "d"
values = [5, 10, 20]

[diagnostics]
mode = "sampled"
cadence = 10

[output]
trace_stride = 10
"#;

const FIG5: &str = r#"name = "fig5"
description = "Sensitivity of the asymptotic rate to the initialization scale"
methods = ["gd", "nag"]
seeds = { start = 0, count = 10 }

[problem]
kind = "mf"
m = 100
n = 80
rank = 5
sigma1 = 1.0
sigma_r = 0.2

[init]
scheme = "mf-sketch"
d = 20

[stop]
eps = 1e-8
max_iters = 100000

[sweep]
param = "c_sqrt_d"
values = [1.0, 10.0, 25.0, 50.0, 100.0, 200.0]

[output]
trace_stride = 10
"#;

const FIG6: &str = r#"name = "fig6"
description = "General unbalanced initialization with a nonzero Y0 of scale c2"
methods = ["gd", "nag"]
seeds = { start = 0, count = 10 }

[problem]
kind = "mf"
m = 100
n = 80
rank = 5
sigma1 = 1.0
sigma_r = 0.2

[init]
scheme = "mf-general"
d = 20
c = 50.0

[stop]
eps = 1e-8
max_iters = 100000

[sweep]
param = "c2"
values = [0.0, 0.1, 1.0]

[output]
trace_stride = 10
"#;

const PROP1: &str = r#"name = "prop1"
description = "Monte Carlo check of the singular-value bounds of the sketch initialization"
methods = ["gd"]
seeds = { start = 0, count = 1000 }

[problem]
kind = "mf"
m = 100
n = 80
rank = 3
sigma1 = 1.0
sigma_r = 0.2

[init]
scheme = "mf-sketch"
d = 10
c = 1.0
tau = 0.05

[diagnostics]
mode = "off"

[verify]
trajectories = false
prop1 = true
prop1_max_violation = 0.01
"#;

const TINY: &str = r#"name = "tiny"
description = "3 x 2 rank-one target for the explicit-operator checks"
methods = ["gd", "nag", "altgd"]
seeds = { start = 0, count = 10 }

[problem]
kind = "mf"
m = 3
n = 2
rank = 1
sigma1 = 1.0
sigma_r = 1.0

[init]
scheme = "mf-sketch"
d = 2
c_sqrt_d = 20.0

[stop]
eps = 0.0
max_iters = 100

[diagnostics]
mode = "full"
"#;

/// `(name, TOML text)` for every built-in configuration.
pub const PRESETS: [(&str, &str); 11] = [
    ("fig1", FIG1),
    ("fig1-lnn", FIG1_LNN),
    ("fig2-mf", FIG2_MF),
    ("fig2-lnn", FIG2_LNN),
    ("fig3", FIG3),
    ("fig4-large", FIG4_LARGE),
    ("fig4-large-lnn", FIG4_LARGE_LNN),
    ("fig5", FIG5),
    ("fig6", FIG6),
    ("prop1", PROP1),
    ("tiny", TINY),
];

pub fn names() -> impl Iterator<Item = &'static str> {
    PRESETS.iter().map(|(n, _)| *n)
}

pub fn text(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

pub fn load(name: &str) -> Result<ExperimentConfig, ConfigError> {
    let text = text(name).ok_or_else(|| ConfigError::Invalid {
        line: None,
        message: format!("unknown preset '{name}'; available: {}", names().collect::<Vec<_>>().join(", ")),
    })?;
    ExperimentConfig::parse(text)
}
