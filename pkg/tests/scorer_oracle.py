"""Plain-Python re-evaluation of every scorer formula, straight from the data files.

Shares no code with ``epgf.bioscore``; used as the oracle for golden values.
"""

import json
import math
import re
from pathlib import Path

DATA = Path(__file__).parent.parent / "src" / "epgf" / "data"
RES = "ACDEFGHIKLMNPQRSTVWY"


def table(name):
    out = {}
    for line in (DATA / name).read_text().splitlines():
        if line.strip() and not line.startswith("#"):
            k, v = line.split("\t")
            out[k] = float(v)
    return out


CFG = json.loads((DATA / "default_scorer.json").read_text())
BG = table(CFG["background_freqs"])
KD = table(CFG["hydropathy_table"])
HELIX = table(CFG["helix_propensity"])
SHEET = table(CFG["sheet_propensity"])
CHARGE = CFG["charge_map"]


def entropy(s):
    n = len(s)
    h = 0.0
    for r in set(s):
        p = s.count(r) / n
        h -= p * math.log(p)
    return max(h, 0.0)


def clamp(x):
    return min(1.0, max(0.0, x))


def longest_run(s):
    best = cur = 1
    for a, b in zip(s, s[1:]):
        cur = cur + 1 if a == b else 1
        best = max(best, cur)
    return best


def sub_scores(s, tag=None):
    n = len(s)
    out = {}
    out["aa_distribution"] = clamp(1 - 0.5 * sum(abs(s.count(r) / n - BG[r]) for r in RES))
    out["aa_diversity"] = len(set(s)) / min(n, 20)
    rare = 1.0
    for r, cap in CFG["rare_caps"].items():
        f = s.count(r) / n
        if f > cap:
            rare = min(rare, 1 - (f - cap) / (2 * cap))
    out["rare_aa"] = clamp(rare)

    g = sum(KD[r] for r in s) / n
    lo, hi = CFG["gravy_window"]
    dist = lo - g if g < lo else g - hi if g > hi else 0.0
    out["hydropathy"] = clamp(1 - dist / 2)
    net = sum(CHARGE.get(r, 0.0) for r in s)
    out["charge_balance"] = 1 - min(1.0, abs(net) / n / CFG["charge_norm"])
    in_runs = 0
    for m in re.finditer(r"(.)\1*", s):
        if len(m.group()) >= 4 and abs(CHARGE.get(m.group(1), 0.0)) >= 0.5:
            in_runs += len(m.group())
    out["stability_proxy"] = 1 - min(1.0, in_runs / n)

    out["global_entropy"] = clamp(entropy(s) / math.log(20))
    w = CFG["complexity_window"]
    if n < w:
        out["local_complexity"] = out["global_entropy"]
    else:
        out["local_complexity"] = clamp(min(entropy(s[i:i + w]) for i in range(n - w + 1)) / math.log(min(w, 20)))
    out["repeat_penalty"] = 1 - min(1.0, (longest_run(s) - 1) / 9)

    h = clamp(1 - abs(sum(HELIX[r] for r in s) / n - 1))
    b = clamp(1 - abs(sum(SHEET[r] for r in s) / n - 1))
    out["ss_balance"] = (h + b) / 2
    pats = CFG["motif_registry"].get(tag) if tag else None
    out["motif"] = 1.0 if not pats else sum(bool(re.search(p, s)) for p in pats) / len(pats)
    return out


def overall(s, tag=None):
    subs = sub_scores(s, tag)
    return sum(subs.values()) / len(subs)
