"""Batch experiments reproducing the evaluation families."""
from .outputs import csv_to_rows, emit_outputs, rows_to_csv
from .runner import ResultRow, ResultTable, aggregate, run_experiment
from .spec import KINDS, ExperimentSpec, SpecError, load_spec, parse_spec, validate

__all__ = ["csv_to_rows", "emit_outputs", "rows_to_csv", "ResultRow", "ResultTable", "aggregate",
           "run_experiment", "KINDS", "ExperimentSpec", "SpecError", "load_spec", "parse_spec",
           "validate"]
