"""Numerical constants and fixed vocabularies shared across the toolkit."""

# Probabilities entering a likelihood or σ⁻¹ are clamped to [PROB_CLAMP, 1 - PROB_CLAMP]
PROB_CLAMP = 1e-6

# Logit magnitude matching PROB_CLAMP, used to bound Bernoulli logits
LOGIT_BOUND = 13.815509557963774

# Floor for Gaussian variances produced from log-variance heads
VARIANCE_FLOOR = 1e-8

# Propensity truncation used by targeted learning
PROPENSITY_CLAMP = (0.01, 0.99)

# Outcome likelihood families
OUTCOME_KINDS = ["binary", "bounded_continuous", "unbounded_continuous"]

# Covariate column kinds
COVARIATE_KINDS = ["binary", "continuous"]

# Where treatments come from when predicting factual outcomes
T_SOURCES = ["observed", "sampled"]

# Ablation vocabulary, in the canonical table order
ABLATION_VARIANTS = ["base", "+z_o*", "+z_o", "+ξ", "+z_o+ξ*", "+z_o+ξ"]

# Variant trained by `train` when the config does not name one
FULL_MODEL_VARIANT = "+z_o+ξ"

# Metric names in report order
METRIC_NAMES = ["eate", "pehe", "eatt", "policy_risk"]

# Evaluation scopes
SCOPES = ["within_sample", "out_of_sample"]

# Dataset sources understood by the generate/train commands
DATASET_SOURCES = ["tvaesynth", "linear", "ihdp_like", "jobs_like", "csv"]

# TMLE base learner kinds
LEARNER_KINDS = ["logistic_linear", "mlp", "constant"]

# Experiment file schema version
CONFIG_SCHEMA_VERSION = 1

# Checkpoint format version
CHECKPOINT_FORMAT_VERSION = 1

# Process exit codes
EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG_ERROR = 2
EXIT_NUMERICAL_ABORT = 3
