# src/output_writer.py
"""
Result persistence for workbench runs.

Every file starts with a header recording the application version, the
seed and the configuration hash. Files are written to a temporary file in
the target directory and moved into place, so a crashed run never leaves a
half-written result behind.
"""
import csv
import io
import json
import logging
import os
import tempfile
from pathlib import Path
from typing import Any, Dict, Iterable, Mapping, Sequence

import numpy as np

from constants import APP_NAME, APP_VERSION, EFFECTIVE_CONFIG_FILE, HEADER_TEMPLATE

logger = logging.getLogger(__name__)


def format_cell(value: Any) -> str:
    """Render one CSV cell; floats use repr so reruns are byte-identical."""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if value is None:
        return ""
    if isinstance(value, (list, tuple, np.ndarray)):
        return " ".join(format_cell(v) for v in value)
    return str(value)


def _json_default(value: Any):
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (set, frozenset)):
        return sorted(value)
    if isinstance(value, complex):
        return {"re": value.real, "im": value.imag}
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")


def canonical_json(data: Any) -> str:
    """Sorted-key compact JSON used for hashing."""
    return json.dumps(data, sort_keys=True, separators=(",", ":"), default=_json_default)


class ResultWriter:
    """
    Writes CSV and JSON results into one output directory.

    Relative file names resolve against out_dir; absolute paths are kept.
    """

    def __init__(self, out_dir, seed: int, config_hash: str, version: str = APP_VERSION):
        self.out_dir = Path(out_dir)
        self.seed = seed
        self.config_hash = config_hash
        self.version = version
        self.written = []

    @property
    def header(self) -> str:
        return HEADER_TEMPLATE.format(
            app=APP_NAME, version=self.version, seed=self.seed, config_hash=self.config_hash
        )

    @property
    def header_fields(self) -> Dict[str, Any]:
        return {
            "app": APP_NAME,
            "version": self.version,
            "seed": self.seed,
            "config_sha256": self.config_hash,
        }

    def resolve(self, name) -> Path:
        path = Path(name)
        return path if path.is_absolute() else self.out_dir / path

    def _atomic_write(self, path: Path, text: str) -> Path:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8", newline="") as handle:
                handle.write(text)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
        self.written.append(path)
        logger.info("wrote %s (%d bytes)", path, len(text.encode("utf-8")))
        return path

    def write_csv(self, name, columns: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
        """
        Write a header comment, the column row and the data rows.

        Raises:
                ValueError: If a row length differs from the column count
        """
        buffer = io.StringIO()
        buffer.write(self.header + "\n")
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(columns)
        for index, row in enumerate(rows):
            if len(row) != len(columns):
                raise ValueError(
                    f"Row {index} has {len(row)} values for {len(columns)} columns"
                )
            writer.writerow([format_cell(v) for v in row])
        return self._atomic_write(self.resolve(name), buffer.getvalue())

    def write_json(self, name, data: Mapping[str, Any]) -> Path:
        payload = {"_header": self.header_fields}
        payload.update(data)
        text = json.dumps(payload, indent=2, sort_keys=True, default=_json_default) + "\n"
        return self._atomic_write(self.resolve(name), text)

    def write_effective_config(self, config: Mapping[str, Any]) -> Path:
        """Echo the effective configuration into the output directory."""
        return self.write_json(EFFECTIVE_CONFIG_FILE, config)
