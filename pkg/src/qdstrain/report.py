"""Structured analysis reports with provenance.

A report is a plain JSON document {version, config_hash, inputs,
stages}.  It contains no timestamps, so re-running a command on the same
inputs and config reproduces it byte for byte.
"""

import hashlib
from pathlib import Path

from . import __version__
from .io import read_json, write_json

REPORT_VERSION = 1


def file_digest(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def build_report(config, input_paths, stages):
    inputs = [
        {"path": Path(p).name, "sha256": file_digest(p)}
        for p in sorted(input_paths, key=lambda p: str(p))
    ]
    return {
        "version": REPORT_VERSION,
        "tool_version": __version__,
        "config_hash": config.config_hash,
        "inputs": inputs,
        "stages": stages,
    }


def write_report(report, path):
    write_json(report, path)


def read_report(path):
    return read_json(path)


def merge_reports(reports):
    """Merge stage maps from several reports; later stages win.

    Inputs are concatenated (deduplicated by digest) so provenance is
    preserved across the merged pipeline.
    """
    merged_stages = {}
    inputs = []
    seen = set()
    config_hashes = []
    for rep in reports:
        merged_stages.update(rep.get("stages", {}))
        for item in rep.get("inputs", []):
            if item["sha256"] not in seen:
                seen.add(item["sha256"])
                inputs.append(item)
        h = rep.get("config_hash")
        if h and h not in config_hashes:
            config_hashes.append(h)
    return {
        "version": REPORT_VERSION,
        "tool_version": __version__,
        "config_hash": config_hashes[0] if len(config_hashes) == 1 else config_hashes,
        "inputs": inputs,
        "stages": merged_stages,
    }
