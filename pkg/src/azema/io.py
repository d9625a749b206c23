"""Path files: versioned CSV and JSON.

CSV layout::

    # azema path v1; config={...}
    path,t,z,kind
    0,0,0,start
    0,0.0123,0.0871,pre_jump
    0,0.0123,-0.0129,post_jump
    ...
    0,1,0.34,censored_end

Floats are written with 17 significant digits, so files round-trip
exactly. The JSON format stores the full segment arrays (uniforms and
marks included) and, for general-f paths, the dense trace.
"""

import csv
import io as _io
import json
import math

import numpy as np

from .paths import DenseTrace, JumpLaw, SamplePath
from .renewal import RenewalParams
from .rng import SeedSpec
from .sampler import AzemaParams
from .structure import GeneralParams, parse_structure_fn

CSV_VERSION = "azema path v1"


def _g(x):
    return format(float(x), ".17g")


def params_from_dict(d):
    """Inverse of the ``as_dict`` methods of the parameter classes."""
    seed = SeedSpec(d["seed"]["master_seed"], d["seed"].get("stream_id", 0))
    family = d.get("family", "beta")
    if family == "beta":
        return AzemaParams(d["beta"], d["n"], d.get("x0", 0.0), d.get("t_max", 1.0), seed,
                           JumpLaw.parse(d.get("jump_law", "bernoulli")))
    if family == "general":
        return GeneralParams(parse_structure_fn(d["f"]), d["n"], d.get("x0", 0.0),
                             d.get("t_max", 1.0), JumpLaw.parse(d.get("jump_law", "bernoulli")),
                             d.get("ode_tol", 1e-8), seed)
    if family == "renewal":
        return RenewalParams(d["variant"], d.get("t_max", 1.0), seed)
    raise ValueError(f"unknown family {family!r}")


def path_rows(path):
    """``(t, z, kind)`` event rows of one jump path."""
    rows = [(path.t_start[0], path.z_start[0], "start")]
    for i in range(len(path)):
        if path.censored[i]:
            from .analysis import value_at

            rows.append((path.t_end[i], value_at(path, path.t_end[i]), "censored_end"))
        else:
            rows.append((path.t_end[i], path.z_pre[i], "pre_jump"))
            rows.append((path.t_end[i], path.z_post[i], "post_jump"))
    return rows


def renewal_rows(path):
    """Event rows of a renewal path: value just before and after each arrival."""
    rows = [(0.0, path.eval(0.0), "start")]
    for s in path.arrivals:
        before = path.eval(np.nextafter(s, 0.0)) if s > 0 else path.eval(0.0)
        rows.append((s, before, "pre_jump"))
        rows.append((s, path.eval(s), "post_jump"))
    rows.append((path.t_max, path.eval(path.t_max), "censored_end"))
    return rows


def write_paths_csv(paths, fh, config):
    """Write ``paths`` (index order) with ``config`` embedded in the header comment."""
    fh.write(f"# {CSV_VERSION}; config={json.dumps(config, sort_keys=True)}\n")
    fh.write("path,t,z,kind\n")
    for k, p in enumerate(paths):
        rows = renewal_rows(p) if isinstance(p.params, RenewalParams) else path_rows(p)
        for t, z, kind in rows:
            fh.write(f"{k},{_g(t)},{_g(z)},{kind}\n")


def read_paths_csv(fh):
    """``(config, rows)``; rows are per path lists of ``(t, z, kind)``."""
    first = fh.readline()
    prefix = f"# {CSV_VERSION}; config="
    if not first.startswith(prefix):
        raise ValueError(f"not an {CSV_VERSION} file")
    config = json.loads(first[len(prefix):])
    reader = csv.DictReader(fh)
    rows = {}
    for r in reader:
        rows.setdefault(int(r["path"]), []).append((float(r["t"]), float(r["z"]), r["kind"]))
    return config, [rows[k] for k in sorted(rows)]


def path_from_rows(params, rows):
    """Rebuild a closed-form path from its CSV rows.

    The uniform of each completed segment is recovered from the flow
    (``z_pre = z_start u^beta``), or from the elapsed time when the flow is
    constant; marks follow from the jump sizes.
    """
    if not isinstance(params, AzemaParams):
        raise ValueError("only closed-form paths can be rebuilt from CSV rows")
    beta, n = params.beta, float(params.n)
    values, _ = params.jump_law.arrays()
    if values.size == 0:
        values = np.array([-1.0, 1.0])

    def hazard(t0, z0, t, z):
        if beta != 0.0 and z0 != 0.0:
            return -math.log(z / z0) / beta
        return n * (t - t0)

    t0, z0 = rows[0][0], rows[0][1]
    segs = []
    i = 1
    while i < len(rows):
        t, z, kind = rows[i]
        if kind == "censored_end":
            # the hazard reached at the horizon bounds the unseen target from below
            w = hazard(t0, z0, t, z) * (1.0 + 1e-12)
            segs.append((t0, z0, math.exp(-w), math.nan, t, math.nan, math.nan, True))
            break
        zq = rows[i + 1][1]
        eps = (zq - (1.0 + beta) * z) * math.sqrt(n)
        eps = float(values[np.argmin(np.abs(values - eps))])
        segs.append((t0, z0, math.exp(-hazard(t0, z0, t, z)), eps, t, z, zq, False))
        t0, z0 = t, zq
        i += 2
    cols = list(zip(*segs))
    return SamplePath(params, *cols[:7], censored=np.array(cols[7], dtype=bool))


def path_to_dict(path):
    d = {
        "params": path.params.as_dict(),
        "t_start": path.t_start.tolist(),
        "z_start": path.z_start.tolist(),
        "u": path.u.tolist(),
        "eps": [None if math.isnan(e) else e for e in path.eps.tolist()],
        "t_end": path.t_end.tolist(),
        "z_pre": [None if math.isnan(e) else e for e in path.z_pre.tolist()],
        "z_post": [None if math.isnan(e) else e for e in path.z_post.tolist()],
        "censored": path.censored.tolist(),
    }
    if path.trace is not None:
        tr = path.trace
        d["trace"] = {"t": tr.t.tolist(), "x": tr.x.tolist(), "hazard": tr.hazard.tolist(),
                      "velocity": tr.velocity.tolist(), "offsets": tr.offsets.tolist()}
    return d


def path_from_dict(d):
    params = params_from_dict(d["params"])

    def arr(key):
        return np.array([math.nan if v is None else v for v in d[key]], dtype=np.float64)

    trace = None
    if "trace" in d:
        tr = d["trace"]
        trace = DenseTrace(np.array(tr["t"]), np.array(tr["x"]), np.array(tr["hazard"]),
                           np.array(tr["velocity"]), np.array(tr["offsets"], dtype=np.int64))
    return SamplePath(params, arr("t_start"), arr("z_start"), arr("u"), arr("eps"), arr("t_end"),
                      arr("z_pre"), arr("z_post"), np.array(d["censored"], dtype=bool), trace)


def renewal_to_dict(path):
    return {"params": path.params.as_dict(), "arrivals": path.arrivals.tolist(),
            "signs": path.signs.tolist(), "next_u": path.next_u}


def write_paths_json(paths, fh, config):
    items = [renewal_to_dict(p) if isinstance(p.params, RenewalParams) else path_to_dict(p)
             for p in paths]
    json.dump({"format": CSV_VERSION, "config": config, "paths": items}, fh, sort_keys=True)
    fh.write("\n")


def read_paths_json(fh):
    doc = json.load(fh)
    if doc.get("format") != CSV_VERSION:
        raise ValueError("unrecognised path file")
    paths = []
    for d in doc["paths"]:
        if "arrivals" in d:
            from .renewal import RenewalPath

            paths.append(RenewalPath(params_from_dict(d["params"]), np.array(d["arrivals"]),
                                     np.array(d["signs"]), d["next_u"]))
        else:
            paths.append(path_from_dict(d))
    return doc["config"], paths


def read_paths(filename):
    """Paths from a JSON or CSV path file (CSV: closed-form families only)."""
    with open(filename) as fh:
        head = fh.read(1)
        fh.seek(0)
        if head == "{":
            return read_paths_json(fh)[1]
        config, rows = read_paths_csv(fh)
    base = params_from_dict(config["params"])
    return [path_from_rows(base.with_seed(k), r) for k, r in enumerate(rows)]


def to_csv_string(paths, config):
    buf = _io.StringIO()
    write_paths_csv(paths, buf, config)
    return buf.getvalue()
