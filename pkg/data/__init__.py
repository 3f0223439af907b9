"""Causal datasets: generators, CSV ingestion, splitting and standardization."""
from .csv_io import load_csv, write_csv
from .fixtures import ihdp_like, jobs_like
from .models import CausalDataset, SplitSpec, Standardization
from .preprocessing import split, split_indices, split_sizes, standardize
from .synth import generate_linear_scm, generate_tvaesynth
