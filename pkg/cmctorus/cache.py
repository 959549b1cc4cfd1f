import os
import json
import hashlib
import logging

import numpy as np

from cmctorus.exceptions import InternalError
from cmctorus.profile import DEFAULT_RTOL, ProfileTable, default_grid_size, solve_profile
from cmctorus.utils import ensure_directory, sha256_arrays

CACHE_ENV = "CMCTORUS_CACHE_DIR"
DEFAULT_CACHE = os.path.join("~", ".cache", "cmctorus")
ARRAY_FIELDS = ("t", "x", "xp", "z", "zp", "w0", "w0p", "w1")


def cache_dir(directory=None):
    """Cache directory: the argument, else $CMCTORUS_CACHE_DIR, else ~/.cache/cmctorus."""
    directory = directory or os.environ.get(CACHE_ENV) or os.path.expanduser(DEFAULT_CACHE)
    return ensure_directory(directory)


def profile_key(a, n_t, rtol):
    raw = json.dumps([repr(float(a)), int(n_t), repr(float(rtol))])
    return "profile_" + hashlib.sha256(raw.encode()).hexdigest()[:20]


def content_hash(tbl):
    return sha256_arrays(*(getattr(tbl, name) for name in ARRAY_FIELDS))


def store_profile(tbl, directory=None):
    base = os.path.join(cache_dir(directory), profile_key(tbl.a, tbl.n_t, tbl.rtol))
    digest = content_hash(tbl)
    np.savez(base + ".npz", **{name: getattr(tbl, name) for name in ARRAY_FIELDS})
    with open(base + ".json", "w") as file:
        json.dump({"a": tbl.a, "gamma": tbl.gamma, "tau": tbl.tau, "h": tbl.h, "n_t": tbl.n_t,
                   "rtol": tbl.rtol, "sha256": digest}, file, indent=2, sort_keys=True)
    return digest


def load_profile(a, n_t, rtol=DEFAULT_RTOL, directory=None):
    """Cached table or None when missing or when its content hash does not match."""
    base = os.path.join(cache_dir(directory), profile_key(a, n_t, rtol))
    if not (os.path.exists(base + ".npz") and os.path.exists(base + ".json")):
        return None
    with open(base + ".json") as file:
        meta = json.load(file)
    with np.load(base + ".npz") as data:
        arrays = {name: data[name] for name in ARRAY_FIELDS}
    tbl = ProfileTable(a=meta["a"], gamma=meta["gamma"], tau=meta["tau"], h=meta["h"], rtol=meta["rtol"], **arrays)
    if content_hash(tbl) != meta["sha256"]:
        logging.error(f"Cached profile {base} fails its content hash, recomputing")
        return None
    return tbl


def cached_profile(a, n_t=None, rtol=DEFAULT_RTOL, directory=None):
    """
    Profile table from the cache, computing and storing it on a miss.

    Returns:
        (ProfileTable, sha256 content hash)
    """
    if n_t is None:
        n_t = default_grid_size(a)
    tbl = load_profile(a, n_t, rtol, directory)
    if tbl is None:
        logging.debug(f"Profile cache miss for a={a}, n_t={n_t}")
        tbl = solve_profile(a, n_t, rtol)
        return tbl, store_profile(tbl, directory)
    return tbl, content_hash(tbl)


def save_solution(path, grid, phi, extra=None):
    """Persist phi with what is needed to rebuild its grid."""
    np.savez(path, phi=np.asarray(getattr(phi, "values", phi)), a=grid.tbl.a, n_t=grid.tbl.n_t,
             rtol=grid.tbl.rtol, n_theta=grid.n_theta, eps=grid.eps, n=-1 if grid.n is None else grid.n,
             extra=json.dumps(extra or {}))
    return path


def load_solution(path):
    """
    Returns:
        dict with phi, a, n_t, rtol, n_theta, eps, n (None for an open bend) and extra
    """
    try:
        with np.load(path) as data:
            out = {key: data[key] for key in data.files}
    except (OSError, ValueError) as e:
        raise InternalError(f"Cannot read solution {path}: {e}")
    solution = {"phi": out["phi"], "a": float(out["a"]), "n_t": int(out["n_t"]), "rtol": float(out["rtol"]),
                "n_theta": int(out["n_theta"]), "eps": float(out["eps"]), "extra": json.loads(str(out["extra"]))}
    solution["n"] = None if int(out["n"]) < 0 else int(out["n"])
    return solution
