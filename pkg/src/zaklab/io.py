"""File formats: profile and series CSV, INI run configs, snapshots and
run manifests. CSV files are comma separated with LF line endings."""
from __future__ import annotations

import configparser
import csv
import hashlib
import io
import json
import os
from pathlib import Path

import numpy as np

from .evolve import GridSpec, ICSpec, SimConfig


class ConfigError(ValueError):
    pass


def out_root(default="."):
    return Path(os.environ.get("ZAK_OUT_DIR", default))


def _fmt(x):
    return repr(float(x))


def write_text(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        fh.write(text)
    return path


# ---------------------------------------------------------------------
# profiles
# ---------------------------------------------------------------------

def profile_csv_text(prof, field="P"):
    vals = prof.P if field == "P" else prof.N
    buf = io.StringIO()
    head = ", ".join(f"{k}={v!r}" if isinstance(v, str) else f"{k}={float(v)!r}"
                     for k, v in prof.header().items())
    buf.write("# " + head + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["eta", field])
    for e, v in zip(prof.eta, vals):
        w.writerow([_fmt(e), _fmt(v)])
    return buf.getvalue()


def read_profile_csv(path):
    with open(path) as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    rows = list(csv.reader(lines))
    data = np.array([[float(x) for x in r] for r in rows[1:] if r])
    return rows[0], data


# ---------------------------------------------------------------------
# configs
# ---------------------------------------------------------------------

_RUN_KEYS = {"dim": int, "dt": float, "t_end": float, "output_every": float,
             "cfl": float, "blowup_factor": float, "resolved_scale": float,
             "homogeneous": "bool", "snapshot_every": int, "max_steps": int, "seed": int,
             "sobolev_ell": "floats", "m_values": "floats"}
_GRID_KEYS = {"kind": str, "extent": float, "M": int}
_IC_KEYS = {"family": str}
_IC_PARAMS = {"amplitude": float, "width": float, "center": "floats", "kvec": "floats",
              "n_mode": str, "n_amplitude": float, "widths": "floats", "a": float,
              "k": int, "t0": float, "t_star": float, "theta": float}
_IC_FAMILIES = {"zero", "gaussian", "self_similar_2d", "self_similar_3d", "random_smooth"}


def _convert(kind, raw, key):
    try:
        if kind == "bool":
            return {"true": True, "yes": True, "1": True,
                    "false": False, "no": False, "0": False}[raw.strip().lower()]
        if kind == "floats":
            return tuple(float(x) for x in raw.replace(",", " ").split())
        return kind(raw.strip())
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"bad value for {key!r}: {raw!r}") from exc


def parse_config_text(text):
    """INI with sections [run], [grid], [ic]. Unknown sections or keys are
    rejected."""
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc
    allowed = {"run": _RUN_KEYS, "grid": _GRID_KEYS, "ic": {**_IC_KEYS, **_IC_PARAMS}}
    for sec in cp.sections():
        if sec not in allowed:
            raise ConfigError(f"unknown section [{sec}]")
        for key in cp[sec]:
            if key not in allowed[sec]:
                raise ConfigError(f"unknown key {key!r} in [{sec}]")
    if "run" not in cp:
        raise ConfigError("missing [run] section")
    run = {k: _convert(_RUN_KEYS[k], v, k) for k, v in cp["run"].items()}
    grid = {k: _convert(_GRID_KEYS[k], v, k) for k, v in cp["grid"].items()} if "grid" in cp else {}
    ic = dict(cp["ic"]) if "ic" in cp else {}
    fam = ic.pop("family", "gaussian")
    if fam not in _IC_FAMILIES:
        raise ConfigError(f"unknown initial-condition family {fam!r}")
    params = {k: _convert(_IC_PARAMS[k], v, k) for k, v in ic.items()}
    cfg = SimConfig(grid=GridSpec(**grid), ic=ICSpec(fam, params), **run)
    try:
        cfg.validate()
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return cfg


def read_config(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    return parse_config_text(text)


def config_to_text(cfg):
    def fl(xs):
        return " ".join(_fmt(x) for x in xs)
    lines = ["[run]"]
    for k in _RUN_KEYS:
        v = getattr(cfg, k)
        if v is None:
            continue
        if isinstance(v, bool):
            v = "true" if v else "false"
        elif isinstance(v, (tuple, list)):
            if not v:
                continue
            v = fl(v)
        lines.append(f"{k} = {v}")
    lines += ["", "[grid]", f"kind = {cfg.grid.kind}", f"extent = {cfg.grid.extent}",
              f"M = {cfg.grid.M}", "", "[ic]", f"family = {cfg.ic.family}"]
    for k, v in cfg.ic.params.items():
        lines.append(f"{k} = {fl(v) if isinstance(v, (tuple, list)) else v}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------
# snapshots and manifests
# ---------------------------------------------------------------------

def snapshot_files(state, outdir, tag, config_hash=""):
    """One CSV per field (node, value) plus a JSON sidecar."""
    outdir = Path(outdir)
    g = state.grid
    nodes = np.arange(np.prod(g.shape))
    paths = []
    for name, vals in (("psi_re", state.psi.real), ("psi_im", state.psi.imag),
                       ("n", state.n), ("nt", state.nt)):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["node", name])
        for j, v in zip(nodes, np.ravel(vals)):
            w.writerow([int(j), _fmt(v)])
        paths.append(write_text(outdir / f"{tag}_{name}.csv", buf.getvalue()))
    meta = {"t": float(state.t), "grid": {"kind": g.kind, "dim": g.dim, "extent": g.extent,
                                          "M": g.M}, "config_hash": config_hash}
    paths.append(write_text(outdir / f"{tag}.json", json.dumps(meta, sort_keys=True, indent=1) + "\n"))
    return paths


def file_digest(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
