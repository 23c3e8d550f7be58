#!/usr/bin/env python3
"""Reference evaluation for the bundled fixture.

Written as a plain loop-by-loop evaluation of the definitions, independent of
the Rust implementation. Regenerate the frozen expectations with

    python3 oracle.py > ../common/fixture_expected.rs
"""
import csv
import math
from collections import defaultdict

import numpy as np

HERE = __file__.rsplit("/", 1)[0]
YEARS = [2008, 2009, 2010]
BASE_YEAR, TARGET_YEAR = 2010, 2018


def load():
    x = defaultdict(float)
    countries, products = set(), set()
    with open(f"{HERE}/exports.csv") as f:
        for row in csv.DictReader(f):
            x[(row["country"], row["product"], int(row["year"]))] = float(row["value"])
            countries.add(row["country"])
            products.add(row["product"])
    h = {}
    with open(f"{HERE}/poverty.csv") as f:
        for row in csv.DictReader(f):
            h[(row["country"], int(row["year"]))] = float(row["headcount"])
    return x, sorted(countries), sorted(products), h


def rca(x, cs, ps, y):
    total = sum(x[(c, p, y)] for c in cs for p in ps)
    out = {}
    for c in cs:
        row = sum(x[(c, q, y)] for q in ps)
        for p in ps:
            col = sum(x[(d, p, y)] for d in cs)
            if row == 0 or col == 0:
                out[(c, p)] = 0.0
            else:
                out[(c, p)] = (x[(c, p, y)] / row) / (col / total)
    return out


def proximity(m, cs, ps):
    y = {}
    for l in ps:
        for k in ps:
            if l == k:
                y[(l, k)] = 0.0
                continue
            n_l = sum(m[(c, l)] for c in cs)
            n_k = sum(m[(c, k)] for c in cs)
            both = sum(1 for c in cs if m[(c, l)] == 1 and m[(c, k)] == 1)
            if n_l == 0 or n_k == 0:
                y[(l, k)] = 0.0
            else:
                y[(l, k)] = min(both / n_l, both / n_k)
    return y


def ppi(x, m, cs, ps, h, yr):
    out = {}
    for p in ps:
        num = 0.0
        q = 0.0
        for c in cs:
            if (c, yr) not in h:
                continue
            tot = sum(x[(c, r, yr)] for r in ps)
            if tot == 0:
                continue
            s = x[(c, p, yr)] / tot
            num += m[(c, p)] * s * h[(c, yr)]
            q += m[(c, p)] * s
        out[p] = num / q if q > 0 else None
    return out


def eigenpoverty(y, prp, ps):
    n = len(ps)
    phi = np.zeros((n, n))
    for i, p in enumerate(ps):
        s = sum(y[(p, r)] for r in ps)
        for j, q in enumerate(ps):
            phi[i, j] = y[(p, q)] / s if s > 0 else 0.0
    star = np.array([[prp[p] * phi[i, j] for j in range(n)] for i, p in enumerate(ps)])
    # connected components of the undirected positive support
    comp = [-1] * n
    labels = 0
    for s in range(n):
        if comp[s] >= 0:
            continue
        stack = [s]
        comp[s] = labels
        while stack:
            u = stack.pop()
            for v in range(n):
                if comp[v] < 0 and (star[u, v] > 0 or star[v, u] > 0):
                    comp[v] = labels
                    stack.append(v)
        labels += 1
    sizes = [comp.count(k) for k in range(labels)]
    best = sizes.index(max(sizes))
    idx = [i for i in range(n) if comp[i] == best]
    sub = star[np.ix_(idx, idx)]
    vals, vecs = np.linalg.eig(sub)
    k = int(np.argmax(vals.real))
    v = np.abs(vecs[:, k].real)
    v = v / v.sum()
    e_prime = np.zeros(n)
    for a, i in enumerate(idx):
        e_prime[i] = v[a]
    return e_prime, [comp[i] == best for i in range(n)], float(vals[k].real)


def resc(values):
    pos = [v for v in values if v > 0]
    lo = min(pos)
    return [math.log(1.0 + v / lo) for v in values]


def main():
    x, cs, ps, h = load()
    yearly_ppi, yearly_e, m_sum = {}, {}, defaultdict(float)
    for yr in YEARS:
        r = rca(x, cs, ps, yr)
        m = {k: (1 if v > 1 else 0) for k, v in r.items()}
        for k, v in m.items():
            m_sum[k] += v
        y = proximity(m, cs, ps)
        pp = ppi(x, m, cs, ps, h, yr)
        prp = {p: (1.0 - pp[p] if pp[p] is not None else 1.0) for p in ps}
        e_prime, in_comp, lam = eigenpoverty(y, prp, ps)
        yearly_ppi[yr] = pp
        yearly_e[yr] = (e_prime, in_comp, lam)

    m_bar = {k: v / len(YEARS) for k, v in m_sum.items()}
    avg_ppi = {}
    for p in ps:
        vals = [yearly_ppi[yr][p] for yr in YEARS if yearly_ppi[yr][p] is not None]
        avg_ppi[p] = sum(vals) / len(vals) if vals else None
    avg_e = {}
    for i, p in enumerate(ps):
        avg_e[p] = sum(1.0 - yearly_e[yr][0][i] for yr in YEARS) / len(YEARS)

    prp_c, eprp_raw = {}, {}
    for c in cs:
        num = den = 0.0
        for p in ps:
            if avg_ppi[p] is None:
                continue
            num += m_bar[(c, p)] * (1.0 - avg_ppi[p])
            den += m_bar[(c, p)]
        prp_c[c] = num / den if den > 0 else None
        num = den = 0.0
        for p in ps:
            num += m_bar[(c, p)] * (1.0 - avg_e[p])
            den += m_bar[(c, p)]
        eprp_raw[c] = num / den if den > 0 else None
    keys = [c for c in cs if eprp_raw[c] is not None]
    eprp = dict(zip(keys, resc([eprp_raw[c] for c in keys])))

    def rh(year):
        keys = [c for c in cs if (c, year) in h]
        return dict(zip(keys, resc([h[(c, year)] for c in keys])))

    rh_base, rh_target = rh(BASE_YEAR), rh(TARGET_YEAR)

    def opt(v):
        return "None" if v is None else f"Some({v!r})"

    print("// Generated by tests/fixtures/oracle.py. Do not edit by hand.")
    print("#![allow(clippy::approx_constant)]")
    print(f"pub const COUNTRIES: [&str; {len(cs)}] = {cs!r};".replace("'", '"'))
    print(f"pub const PRODUCTS: [&str; {len(ps)}] = {ps!r};".replace("'", '"'))
    print(f"pub const YEARS: [i32; {len(YEARS)}] = {YEARS!r};")
    print(f"pub const YEARLY_PPI: [[Option<f64>; {len(ps)}]; {len(YEARS)}] = [")
    for yr in YEARS:
        print("    [" + ", ".join(opt(yearly_ppi[yr][p]) for p in ps) + "],")
    print("];")
    print(f"pub const YEARLY_E_PRIME: [[f64; {len(ps)}]; {len(YEARS)}] = [")
    for yr in YEARS:
        print("    [" + ", ".join(repr(float(v)) for v in yearly_e[yr][0]) + "],")
    print("];")
    print(f"pub const YEARLY_IN_COMPONENT: [[bool; {len(ps)}]; {len(YEARS)}] = [")
    for yr in YEARS:
        print("    [" + ", ".join("true" if b else "false" for b in yearly_e[yr][1]) + "],")
    print("];")
    print(f"pub const YEARLY_EIGENVALUE: [f64; {len(YEARS)}] = [" + ", ".join(repr(float(yearly_e[yr][2])) for yr in YEARS) + "];")
    print(f"pub const AVG_PPI: [Option<f64>; {len(ps)}] = [" + ", ".join(opt(avg_ppi[p]) for p in ps) + "];")
    print(f"pub const AVG_EIGENPOVERTY: [f64; {len(ps)}] = [" + ", ".join(repr(float(avg_e[p])) for p in ps) + "];")
    print(f"pub const PRP_C: [Option<f64>; {len(cs)}] = [" + ", ".join(opt(prp_c[c]) for c in cs) + "];")
    print(f"pub const EPRP_C: [Option<f64>; {len(cs)}] = [" + ", ".join(opt(eprp.get(c)) for c in cs) + "];")
    print(f"pub const RH_BASE: [Option<f64>; {len(cs)}] = [" + ", ".join(opt(rh_base.get(c)) for c in cs) + "];")
    print(f"pub const RH_TARGET: [Option<f64>; {len(cs)}] = [" + ", ".join(opt(rh_target.get(c)) for c in cs) + "];")


if __name__ == "__main__":
    main()
