"""Self-describing ``.npz`` container for problem instances."""
import json

import numpy as np
import scipy.sparse as sp

from .groups_prox import GroupPartition
from .losses import LossModel
from .ppdna import ProblemSpec

FORMAT_VERSION = 1
DENSITY_THRESHOLD = 0.25


class InstanceFormatError(ValueError):
    """File is not a readable instance container."""


def choose_layout(A):
    """``"dense"`` if more than 25% of entries are nonzero, else ``"csr"``."""
    nnz = A.nnz if sp.issparse(A) else int(np.count_nonzero(A))
    size = A.shape[0] * A.shape[1]
    return "dense" if size and nnz / size > DENSITY_THRESHOLD else "csr"


def save_instance(path, spec, x_star=None, config=None, manifest=None, layout=None):
    """Write ``spec`` (and optionally the planted solution) to ``path``.

    ``layout`` overrides the density rule with ``"dense"`` or ``"csr"``.
    """
    A = spec.A
    layout = layout or choose_layout(A)
    arrays = {
        "format_version": np.int64(FORMAT_VERSION),
        "layout": np.str_(layout),
        "shape": np.asarray(A.shape, dtype=np.int64),
        "loss": np.str_(spec.loss.kind),
        "b": spec.loss.b,
        "lam": np.float64(spec.lam),
        "c": spec.c,
        "group_id": spec.part.group_id.astype(np.int64),
        "weights": spec.part.weights,
        "config": np.str_(json.dumps(config or {}, sort_keys=True)),
        "manifest": np.str_(json.dumps(manifest or {}, sort_keys=True)),
    }
    if layout == "dense":
        arrays["A"] = np.ascontiguousarray(A.toarray() if sp.issparse(A) else A,
                                           dtype=np.float64)
    elif layout == "csr":
        csr = sp.csr_matrix(A, dtype=np.float64)
        csr.sort_indices()
        arrays.update(A_data=csr.data, A_indices=csr.indices.astype(np.int64),
                      A_indptr=csr.indptr.astype(np.int64))
    else:
        raise ValueError(f"unknown layout {layout!r}")
    if x_star is not None:
        arrays["x_star"] = np.asarray(x_star, dtype=np.float64)
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)


def load_instance(path):
    """Returns ``(spec, x_star_or_None, config_dict, manifest_dict)``."""
    try:
        z = np.load(path, allow_pickle=False)
    except (ValueError, OSError) as exc:
        if isinstance(exc, FileNotFoundError):
            raise
        raise InstanceFormatError(f"{path} is not an instance container: {exc}") from exc
    with z:
        try:
            version = int(z["format_version"])
            if version != FORMAT_VERSION:
                raise InstanceFormatError(f"unsupported format_version {version}")
            layout = str(z["layout"])
            shape = tuple(int(v) for v in z["shape"])
            if layout == "dense":
                A = np.array(z["A"])
            elif layout == "csr":
                A = sp.csr_matrix((z["A_data"], z["A_indices"], z["A_indptr"]), shape=shape)
            else:
                raise InstanceFormatError(f"unknown layout {layout!r}")
            if A.shape != shape:
                raise InstanceFormatError("matrix does not match its recorded shape")
            gid = np.array(z["group_id"])
            groups = [np.flatnonzero(gid == g) for g in range(int(gid.max()) + 1)]
            part = GroupPartition(groups, weights=np.array(z["weights"]), n=shape[1])
            spec = ProblemSpec(A, LossModel(str(z["loss"]), np.array(z["b"])),
                               float(z["lam"]), part, np.array(z["c"]))
            x_star = np.array(z["x_star"]) if "x_star" in z.files else None
            config = json.loads(str(z["config"]))
            manifest = json.loads(str(z["manifest"]))
        except KeyError as exc:
            raise InstanceFormatError(f"{path} lacks field {exc}") from exc
    return spec, x_star, config, manifest
