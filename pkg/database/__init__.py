"""Database package initialization."""
from .db import ResultsDatabase
from .models import ReplicationMetric, RunRecord
