import json
import datetime
import numbers

import numpy as np

from cmctorus.exceptions import InternalError

SCHEMA_VERSION = 1
REQUIRED_KEYS = {"schema_version": int, "mode": str, "config": dict, "diagnostics": dict,
                 "provenance": dict, "wall_clock_s": (float, type(None)), "created": str}


def new_report(mode, config=None):
    """Schema-valid skeleton; diagnostics are filled in by the pipeline stages."""
    return {"schema_version": SCHEMA_VERSION,
            "mode": mode,
            "config": config.to_dict() if config is not None else {},
            "diagnostics": {},
            "provenance": {},
            "wall_clock_s": None,
            "created": datetime.datetime.now().isoformat(timespec="seconds")}


def validate_report(report):
    for key, kind in REQUIRED_KEYS.items():
        if key not in report:
            raise InternalError(f"Report misses '{key}'")
        if not isinstance(report[key], kind):
            raise InternalError(f"Report key '{key}' has type {type(report[key]).__name__}")
    if report["schema_version"] != SCHEMA_VERSION:
        raise InternalError(f"Report schema {report['schema_version']} differs from {SCHEMA_VERSION}")
    return report


def to_jsonable(value):
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, numbers.Integral):
        return int(value)
    if isinstance(value, numbers.Real):
        value = float(value)
        return value if np.isfinite(value) else repr(value)
    return value


def write_report(report, path):
    validate_report(report)
    with open(path, "w") as file:
        json.dump(to_jsonable(report), file, indent=2, sort_keys=True)
    return path


def read_report(path):
    with open(path) as file:
        return validate_report(json.load(file))


def error_record(error):
    return {"error": type(error).__name__, "message": str(error)}


class TraceWriter:
    """Line-delimited JSON sink for iteration records; usable as a fixed-point callback."""

    def __init__(self, path):
        self.path = path
        self.records = []
        self.file = open(path, "w")

    def __call__(self, record):
        self.records.append(record)
        self.file.write(json.dumps(to_jsonable(record), sort_keys=True) + "\n")
        self.file.flush()

    def close(self):
        self.file.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
