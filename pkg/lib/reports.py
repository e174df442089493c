"""Result files: JSON and CSV tables, JUnit XML for the verification suite and a run manifest."""

import csv
import dataclasses
import enum
import json
import logging
import math
import os
import subprocess
import tempfile
import xml.etree.ElementTree as ET
from datetime import datetime, timezone
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence

import humanize
import numpy as np


FLOAT_FORMAT = "{:.12g}"

SWEEP_COLUMNS = [
    "scenario_id",
    "R",
    "p",
    "epsilon",
    "seed",
    "acc_plus",
    "acc_minus",
    "acc_overall",
    "ad",
    "ad_gap",
    "ci_halfwidth",
]


def _get_version() -> str:
    try:
        result = subprocess.run(
            ["git", "rev-parse", "--short", "HEAD"],
            cwd=os.path.dirname(os.path.abspath(__file__)),
            stdout=subprocess.PIPE,
            stderr=subprocess.PIPE,
            check=True,
            text=True,
        )
        version = result.stdout.strip()
        if version:
            return version
    except (OSError, subprocess.CalledProcessError) as exc:
        logging.debug("Unable to derive git version; falling back to package version: %s", exc)
    return "0.1.0"


VERSION = _get_version()


def to_jsonable(value: Any) -> Any:
    """Convert numpy values, dataclasses and non-finite floats into plain JSON types."""
    if hasattr(value, "to_dict"):
        return to_jsonable(value.to_dict())
    if dataclasses.is_dataclass(value) and not isinstance(value, type):
        return to_jsonable(dataclasses.asdict(value))
    if isinstance(value, Mapping):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, enum.Enum):
        return value.value
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer, int)):
        return int(value)
    if isinstance(value, (np.floating, float)):
        value = float(value)
        if math.isfinite(value):
            return value
        return "nan" if math.isnan(value) else ("inf" if value > 0 else "-inf")
    return value


def format_cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (np.integer, int)):
        return str(int(value))
    if isinstance(value, (np.floating, float)):
        return FLOAT_FORMAT.format(float(value))
    return str(value)


def _atomic_write(path: str, write) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp_path = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as handle:
            write(handle)
        os.replace(tmp_path, path)
    except BaseException:
        if os.path.exists(tmp_path):
            os.unlink(tmp_path)
        raise
    logging.debug(f"Wrote {path} ({humanize.naturalsize(os.path.getsize(path))})")


def write_json(path: str, payload: Any) -> str:
    def write(handle):
        json.dump(to_jsonable(payload), handle, indent=2)
        handle.write("\n")

    _atomic_write(path, write)
    return path


def write_csv(path: str, rows: Iterable[Mapping[str, Any]], columns: Optional[Sequence[str]] = None) -> str:
    """Write rows with a fixed column order; keys missing from a row become empty cells."""
    rows = list(rows)
    if columns is None:
        columns = list(rows[0].keys()) if rows else []

    def write(handle):
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([format_cell(row.get(column)) for column in columns])

    _atomic_write(path, write)
    return path


def write_table(out_dir: str, stem: str, rows: List[Dict[str, Any]], fmt: str, columns: Optional[Sequence[str]] = None) -> List[str]:
    """Write `rows` as <stem>.csv and/or <stem>.json depending on `fmt`."""
    written = []
    if fmt in ("csv", "both"):
        written.append(write_csv(os.path.join(out_dir, f"{stem}.csv"), rows, columns))
    if fmt in ("json", "both"):
        written.append(write_json(os.path.join(out_dir, f"{stem}.json"), rows))
    return written


def junit_tree(suite) -> ET.ElementTree:
    root = ET.Element(
        "testsuite",
        name="robustgap.verify",
        tests=str(len(suite.results)),
        failures=str(sum(1 for r in suite.results if not r.passed and r.error is None)),
        errors=str(sum(1 for r in suite.results if r.error is not None)),
        time=f"{sum(r.elapsed for r in suite.results):.3f}",
    )
    properties = ET.SubElement(root, "properties")
    for name, value in (("seed", suite.seed), ("n_major", suite.n_major), ("threshold_sigma", suite.threshold)):
        ET.SubElement(properties, "property", name=name, value=format_cell(value))
    for result in suite.results:
        case = ET.SubElement(
            root, "testcase", classname=f"robustgap.{result.family}", name=result.name, time=f"{result.elapsed:.3f}"
        )
        if result.error is not None:
            ET.SubElement(case, "error", message=result.error)
        elif not result.passed:
            worst = sorted(result.distances.items(), key=lambda item: -item[1])[:3]
            message = ", ".join(f"{k}={v:.2f} sigma" for k, v in worst) or "certificate check failed"
            failure = ET.SubElement(case, "failure", message=message)
            failure.text = json.dumps(to_jsonable(result.detail), indent=2)
    ET.indent(root)
    return ET.ElementTree(root)


def write_junit(path: str, suite) -> str:
    tree = junit_tree(suite)

    def write(handle):
        handle.write('<?xml version="1.0" encoding="utf-8"?>\n')
        tree.write(handle, encoding="unicode")
        handle.write("\n")

    _atomic_write(path, write)
    return path


def write_manifest(out_dir: str, command: str, config: Dict[str, Any], outputs: List[str]) -> Dict[str, Any]:
    """Record what a run produced, alongside the effective configuration."""
    entries = []
    for path in sorted(outputs):
        entries.append(
            {
                "file": os.path.relpath(path, out_dir),
                "size_bytes": os.path.getsize(path),
                "modified": datetime.fromtimestamp(os.path.getmtime(path), tz=timezone.utc).isoformat(),
            }
        )
    manifest = {
        "command": command,
        "version": VERSION,
        "created": datetime.now(timezone.utc).isoformat(),
        "config": config,
        "outputs": entries,
    }
    write_json(os.path.join(out_dir, "manifest.json"), manifest)
    total = sum(entry["size_bytes"] for entry in entries)
    logging.info(f"{command}: wrote {len(entries)} files ({humanize.naturalsize(total)}) to {out_dir}")
    return manifest
