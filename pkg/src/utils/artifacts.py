"""
Artifact writers.

CSV and JSON outputs are written atomically (temp file in the target
directory, then os.replace) with 17-significant-digit floats, so reruns of
the same manifest produce byte-identical files.
"""

import csv
import io
import json
import os
import tempfile
from importlib import metadata
from pathlib import Path
from typing import Any, Dict, Iterable, List, Sequence, Tuple, Union

import numpy as np

from .. import __version__
from ..core.config import tolerance_settings
from ..core.errors import ArtifactWriteError
from ..core.model import ModelSpec, ValidatedModel, model_document
from ..core.runtime import get_logger

logger = get_logger()

_VERSIONED_PACKAGES = ("numpy", "scipy", "lmfit", "thewalrus", "pydantic", "structlog", "python-dotenv")


def format_value(value: Any) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def write_text(path: Union[str, Path], text: str):
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        handle = tempfile.NamedTemporaryFile("w", encoding="utf-8", newline="", dir=path.parent,
                                             prefix=f".{path.name}.", suffix=".tmp", delete=False)
        try:
            with handle:
                handle.write(text)
            os.replace(handle.name, path)
        except BaseException:
            Path(handle.name).unlink(missing_ok=True)
            raise
    except OSError as e:
        logger.error("artifact_write_failed", path=str(path), error=str(e), error_type=type(e).__name__)
        raise ArtifactWriteError(str(path), e.strerror or str(e)) from e
    logger.debug("artifact_written", path=str(path), bytes=len(text.encode("utf-8")))


def write_csv(path: Union[str, Path], header: Sequence[str], rows: Iterable[Sequence[Any]]):
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_value(v) for v in row])
    write_text(path, buffer.getvalue())


def _flags(values: Sequence[bool]) -> str:
    return "".join("1" if v else "0" for v in values)


def csv_table(payload) -> Tuple[List[str], List[List[Any]]]:
    """Header and rows for every payload type the CLI emits."""
    from ..services.correlations import CorrelationSeries
    from ..services.moments import MultiplicityReport
    from ..services.nhh import EigenReport
    from ..services.sensitivity import BranchTrajectories, SplittingFit
    from ..services.spectra import SpectrumSeries

    if isinstance(payload, CorrelationSeries):
        values = np.asarray(payload.values, dtype=complex)
        return ["tau", "re", "im"], [[t, v.real, v.imag] for t, v in zip(payload.tau, values)]
    if isinstance(payload, SpectrumSeries):
        return (["omega", "value", "kind", "convention"],
                [[w, v, payload.kind, payload.convention] for w, v in zip(payload.omega, payload.values)])
    if isinstance(payload, EigenReport):
        rows = []
        for i, value in enumerate(payload.eigenvalues):
            cluster = payload.cluster_of(i)
            rows.append([i, value.real, value.imag, cluster.indices[0], cluster.algebraic, cluster.geometric])
        return ["index", "re", "im", "cluster", "alg", "geo"], rows
    if isinstance(payload, list) and all(isinstance(r, MultiplicityReport) for r in payload):
        return (["lambda_re", "lambda_im", "alg", "geo", "lep_order"],
                [[r.eigenvalue.real, r.eigenvalue.imag, r.algebraic, r.geometric, r.lep_order] for r in payload])
    if isinstance(payload, BranchTrajectories):
        n = payload.values.shape[1]
        header = [payload.parameter or "param"]
        for k in range(n):
            header += [f"branch{k + 1}_re", f"branch{k + 1}_im"]
        header.append("degenerate")
        ambiguous = set(payload.ambiguous)
        rows = []
        for i, (p, values) in enumerate(zip(payload.grid, payload.values)):
            row = [p]
            for v in values:
                row += [v.real, v.imag]
            rows.append(row + [i in ambiguous])
        return header, rows
    if isinstance(payload, SplittingFit):
        return (["epsilon", "split", "distance", "centroid_re", "centroid_im", "branch_real_flags",
                 "lep_branch_real_flags"],
                [[e, s, d, c.real, c.imag, _flags(f), _flags(g)] for e, s, d, c, f, g in
                 zip(payload.epsilons, payload.splittings, payload.distances,
                     payload.centroid_shifts, payload.real_flags, payload.lep_branch_real_flags)])
    raise TypeError(f"no CSV schema for payload of type {type(payload).__name__}")


def emit_csv(payload, path: Union[str, Path]) -> Path:
    """
    Write a series or report as CSV.

    Raises:
        TypeError: unknown payload type
        ArtifactWriteError: the file could not be written
    """
    header, rows = csv_table(payload)
    write_csv(path, header, rows)
    return Path(path)


def _normalize(value: Any):
    """Plain-Python view of numpy and complex values for json.dumps."""
    if isinstance(value, dict):
        return {str(k): _normalize(v) for k, v in value.items()}
    if isinstance(value, np.ndarray):
        return _normalize(value.tolist())
    if isinstance(value, (list, tuple)):
        return [_normalize(v) for v in value]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (complex, np.complexfloating)):
        return {"re": _normalize(float(value.real)), "im": _normalize(float(value.imag))}
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if np.isfinite(value) else str(value)
    if isinstance(value, Path):
        return str(value)
    return value


def dumps(payload: Any) -> str:
    return json.dumps(_normalize(payload), indent=2, sort_keys=True) + "\n"


def emit_json(payload: Any, path: Union[str, Path]) -> Path:
    write_text(path, dumps(payload))
    return Path(path)


def package_versions() -> Dict[str, str]:
    versions = {"lepspec": __version__}
    for name in _VERSIONED_PACKAGES:
        try:
            versions[name] = metadata.version(name)
        except metadata.PackageNotFoundError:
            versions[name] = "unknown"
    return versions


def write_manifest(out_dir: Union[str, Path], verb: str, options: Dict[str, Any],
                   model: Union[ModelSpec, ValidatedModel, None], outputs: Sequence[str]) -> Path:
    """manifest.json: verb, options, model document, tolerances and versions."""
    manifest = {
        "verb": verb,
        "options": options,
        "model": model_document(model) if model is not None else None,
        "tolerances": tolerance_settings(),
        "versions": package_versions(),
        "outputs": sorted(outputs),
    }
    return emit_json(manifest, Path(out_dir) / "manifest.json")
