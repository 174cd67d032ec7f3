"""
Run artifacts: manifest, CSV tables, key=value reports and JSON summaries.

Everything written here is a function of the resolved config and seed, so two
runs of the same config produce byte-identical tables. The manifest is
written before any pipeline work starts and rewritten once the run ends.
"""

import hashlib
import json
import math
import platform
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional

import numpy as np
import pandas as pd
import scipy
import structlog

from config.experiment import ExperimentConfig, serialize_config
from core import __version__
from core.exceptions import CavityEchoError

logger = structlog.get_logger(__name__)

MANIFEST_NAME = "manifest.json"
CONFIG_NAME = "config.yaml"
FLOAT_FORMAT = "%.17g"


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def sha256_file(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def plain(value: Any) -> Any:
    """numpy scalars and arrays to JSON-friendly Python values; non-finite floats become strings"""
    if isinstance(value, Mapping):
        return {str(k): plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return [plain(v) for v in value.tolist()]
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer, int)):
        return int(value)
    if isinstance(value, (np.floating, float)):
        number = float(value)
        return number if math.isfinite(number) else repr(number)
    if isinstance(value, (np.complexfloating, complex)):
        return {"re": plain(value.real), "im": plain(value.imag)}
    return value


def versions() -> Dict[str, str]:
    return {
        "cavityecho": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "pandas": pd.__version__,
        "platform": platform.platform()[:256],
    }


class ArtifactWriter:
    """Writes the outputs of one run into a single directory"""

    def __init__(self, out_dir: Path, config: ExperimentConfig):
        self.out_dir = Path(out_dir)
        self.config = config
        self.config_text = serialize_config(config)
        self.written: List[str] = []
        self.logger = logger.bind(component="artifacts", out_dir=str(self.out_dir))

    def _path(self, name: str) -> Path:
        return self.out_dir / name

    def _record(self, name: str) -> Path:
        if name not in self.written:
            self.written.append(name)
        return self._path(name)

    def _manifest(self) -> Dict[str, Any]:
        return {
            "experiment": self.config.experiment.value,
            "seed": self.config.seed,
            "config_sha256": sha256_text(self.config_text),
            "config": config_dict(self.config),
            "versions": versions(),
        }

    def write_manifest(self) -> Path:
        """Resolved config, seed and versions; status stays 'running' until finalize"""
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self._path(CONFIG_NAME).write_text(self.config_text, encoding="utf-8")
        manifest = self._manifest()
        manifest["status"] = "running"
        path = self._path(MANIFEST_NAME)
        path.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
        self.logger.info("manifest_written", experiment=manifest["experiment"], seed=manifest["seed"])
        return path

    def write_table(
        self, name: str, frame: pd.DataFrame, metadata: Optional[Mapping[str, Any]] = None
    ) -> Path:
        """CSV with `# key: value` lines, one header line and 17 significant digits"""
        path = self._record(name)
        header = {"experiment": self.config.experiment.value, "seed": self.config.seed}
        header.update(metadata or {})
        with path.open("w", encoding="utf-8", newline="") as handle:
            for key, value in header.items():
                handle.write(f"# {key}: {_meta_value(value)}\n")
            frame.to_csv(handle, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
        self.logger.debug("table_written", name=name, rows=len(frame))
        return path

    def write_text(self, name: str, text: str) -> Path:
        path = self._record(name)
        path.write_text(text, encoding="utf-8")
        return path

    def write_json(self, name: str, data: Mapping[str, Any]) -> Path:
        path = self._record(name)
        path.write_text(json.dumps(plain(data), indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return path

    def finalize(self, exit_code: int, error: Optional[CavityEchoError] = None) -> Path:
        """
        Rewrite the manifest with the outcome

        A failed run keeps whatever was written so far and marks it partial.
        """
        manifest = self._manifest()
        manifest["status"] = "complete" if exit_code == 0 else "failed"
        manifest["exit_code"] = exit_code
        manifest["partial"] = exit_code != 0
        manifest["outputs"] = {
            name: sha256_file(self._path(name)) for name in self.written if self._path(name).exists()
        }
        if error is not None:
            manifest["error"] = {
                "type": type(error).__name__,
                "message": error.message,
                "context": plain(error.context),
            }
        path = self._path(MANIFEST_NAME)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
        self.logger.info("run_finalized", status=manifest["status"], outputs=len(manifest["outputs"]))
        return path


def config_dict(config: ExperimentConfig) -> Dict[str, Any]:
    return plain(config.model_dump(mode="json", exclude_none=True))


def _meta_value(value: Any) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)
