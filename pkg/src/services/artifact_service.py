"""
Artifact Service
Writes CSV, key-value, JSON manifest, SVG and Excel artifacts with
reproducible bytes, and removes partial output when a run fails
"""

import json
import logging
from pathlib import Path
from typing import Dict, Mapping

import numpy as np
import pandas as pd

from src.errors import ValidationError

logger = logging.getLogger(__name__)

FLOAT_FORMAT = '%.17g'


def format_value(value) -> str:
    """Render a scalar for key-value files with full double precision"""
    if isinstance(value, (bool, np.bool_)):
        return 'true' if value else 'false'
    if isinstance(value, (float, np.floating)):
        return FLOAT_FORMAT % float(value)
    if value is None:
        return ''
    return str(value)


def write_csv(frame: pd.DataFrame, path) -> Path:
    path = Path(path)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator='\n')
    return path


def write_key_values(mapping: Mapping, path) -> Path:
    path = Path(path)
    lines = [f"{key}={format_value(value)}" for key, value in mapping.items()]
    with open(path, 'w', newline='\n', encoding='utf-8') as handle:
        handle.write('\n'.join(lines) + '\n')
    return path


def read_key_values(path) -> Dict[str, str]:
    """Parse `key=value` (or `key = value`) lines; '#' starts a comment"""
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"File not found: {path}")
    values = {}
    with open(path, encoding='utf-8') as handle:
        for number, raw in enumerate(handle, start=1):
            line = raw.split('#', 1)[0].strip()
            if not line:
                continue
            if '=' not in line:
                raise ValidationError(f"{path}:{number}: expected key=value, got '{raw.strip()}'")
            key, value = line.split('=', 1)
            values[key.strip()] = value.strip()
    return values


class ArtifactWriter:
    """
    Collects the files written by one subcommand.

    Used as a context manager: if the block raises, every file written so far
    is deleted so a failed run never leaves a half-populated directory.
    """

    def __init__(self, output_dir):
        self.output_dir = Path(output_dir)
        self.written = []

    def __enter__(self):
        self.output_dir.mkdir(parents=True, exist_ok=True)
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc_type is not None:
            self.discard()
        return False

    def path(self, name) -> Path:
        return self.output_dir / name

    def _track(self, path):
        self.written.append(Path(path))
        logger.debug(f"Wrote {path}")
        return path

    def csv(self, name, frame: pd.DataFrame) -> Path:
        return self._track(write_csv(frame, self.path(name)))

    def key_values(self, name, mapping: Mapping) -> Path:
        return self._track(write_key_values(mapping, self.path(name)))

    def json(self, name, payload) -> Path:
        path = self.path(name)
        with open(path, 'w', newline='\n', encoding='utf-8') as handle:
            handle.write(json.dumps(payload, sort_keys=True, indent=2, default=_json_default) + '\n')
        return self._track(path)

    def svg(self, name, figure) -> Path:
        path = self.path(name)
        figure.savefig(path, format='svg', metadata={'Date': None})
        return self._track(path)

    def excel(self, name, sheets: Mapping[str, pd.DataFrame]) -> Path:
        path = self.path(name)
        with pd.ExcelWriter(path, engine='openpyxl') as writer:
            for sheet_name, frame in sheets.items():
                frame.to_excel(writer, sheet_name=sheet_name[:31], index=False)
        return self._track(path)

    def manifest(self, subcommand, parameters: Mapping, versions: Mapping, seeds=None) -> Path:
        """Parameters, seeds and versions needed to reproduce the directory, with no wall-clock time"""
        payload = {
            'subcommand': subcommand,
            'parameters': dict(parameters),
            'seeds': seeds or {},
            'versions': dict(versions),
            'artifacts': sorted(p.name for p in self.written)
        }
        return self.json('manifest.json', payload)

    def discard(self):
        for path in self.written:
            try:
                path.unlink()
            except FileNotFoundError:
                pass
        logger.warning(f"Removed {len(self.written)} partial artifacts from {self.output_dir}")
        self.written = []


def _json_default(value):
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, Path):
        return str(value)
    return str(value)
