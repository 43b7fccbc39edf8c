#!/usr/bin/env python3
"""Convert a Matpower .m case into the toolkit's plain-text case format.

Usage: matpower2case.py input.m [output.case]

Reads mpc.baseMVA and the mpc.bus / mpc.branch / mpc.gen tables, converts
MW/MVAr columns to per-unit on the system base, and writes BASE_MVA/BUS/
BRANCH/GEN sections. Matches the behaviour of `gridtwin convert-case`:

  * bus Vm/Va become the voltage/angle setpoints (angles stay in degrees)
  * an in-service generator's Vg overwrites its bus voltage setpoint
  * a PV bus without any in-service generator is demoted to PQ
  * tap ratio 0 means an ordinary line (tap 1)
  * out-of-service generators are dropped; phase shifters are rejected
"""

import math
import re
import sys

PQ, PV, SLACK = 1, 2, 3


def fmt(x):
    x = float(x)
    if x == 0.0:
        return "-0" if math.copysign(1.0, x) < 0 else "0"
    s = repr(x)
    return s[:-2] if s.endswith(".0") else s


def strip_comments(text):
    return "\n".join(line.split("%", 1)[0] for line in text.splitlines())


def matrix_block(text, key):
    m = re.search(re.escape(key) + r"\s*=\s*\[(.*?)\]", text, re.S)
    if m is None:
        sys.exit(f"error: missing {key} table")
    rows = []
    for row_text in re.split(r"[;\n]", m.group(1)):
        cells = row_text.split()
        if cells:
            rows.append([float(c) for c in cells])
    if not rows:
        sys.exit(f"error: {key} table is empty")
    return rows


def scalar(text, key):
    m = re.search(re.escape(key) + r"\s*=\s*([^;]+);", text)
    if m is None:
        sys.exit(f"error: missing {key}")
    return float(m.group(1).strip())


def convert(text):
    text = strip_comments(text)
    base = scalar(text, "mpc.baseMVA")
    if base <= 0:
        sys.exit("error: baseMVA must be positive")

    buses = []
    for row in matrix_block(text, "mpc.bus"):
        if len(row) < 13:
            sys.exit("error: bus row needs 13 columns")
        kind = int(row[1])
        if kind not in (PQ, PV, SLACK):
            sys.exit(f"error: bus {int(row[0])} has unsupported type {kind}")
        buses.append({
            "id": int(row[0]), "kind": kind,
            "pd": row[2] / base, "qd": row[3] / base,
            "gs": row[4] / base, "bs": row[5] / base,
            "vset": row[7], "theta": row[8],
        })
    by_id = {b["id"]: b for b in buses}

    branches = []
    for row in matrix_block(text, "mpc.branch"):
        if len(row) < 11:
            sys.exit("error: branch row needs 11 columns")
        if row[9] != 0.0:
            sys.exit(f"error: branch {int(row[0])}-{int(row[1])} has a phase shift, "
                     "which is not supported")
        branches.append({
            "from": int(row[0]), "to": int(row[1]),
            "r": row[2], "x": row[3], "b": row[4],
            "tap": row[8] if row[8] != 0.0 else 1.0,
            "status": 1 if row[10] != 0.0 else 0,
        })

    gens = []
    for row in matrix_block(text, "mpc.gen"):
        if len(row) < 8:
            sys.exit("error: gen row needs 8 columns")
        if row[7] <= 0:
            continue
        gen = {"bus": int(row[0]), "pg": row[1] / base, "qg": row[2] / base, "vset": row[5]}
        gens.append(gen)
        bus = by_id.get(gen["bus"])
        if bus is not None and bus["kind"] != PQ:
            bus["vset"] = gen["vset"]
    dispatched = {g["bus"] for g in gens}
    for bus in buses:
        if bus["kind"] == PV and bus["id"] not in dispatched:
            bus["kind"] = PQ

    out = [f"BASE_MVA {fmt(base)}", "BUS", "# id kind Pd Qd Gs Bs Vset ThetaSet"]
    for b in buses:
        out.append(f"{b['id']} {b['kind']} {fmt(b['pd'])} {fmt(b['qd'])} "
                   f"{fmt(b['gs'])} {fmt(b['bs'])} {fmt(b['vset'])} {fmt(b['theta'])}")
    out.append("BRANCH")
    out.append("# from to r x b tap status")
    for br in branches:
        out.append(f"{br['from']} {br['to']} {fmt(br['r'])} {fmt(br['x'])} "
                   f"{fmt(br['b'])} {fmt(br['tap'])} {br['status']}")
    out.append("GEN")
    out.append("# bus Pg Qg Vset")
    for g in gens:
        out.append(f"{g['bus']} {fmt(g['pg'])} {fmt(g['qg'])} {fmt(g['vset'])}")
    return "\n".join(out) + "\n"


def main():
    if len(sys.argv) not in (2, 3):
        sys.exit(__doc__.strip().splitlines()[2])
    with open(sys.argv[1], encoding="utf-8") as f:
        converted = convert(f.read())
    if len(sys.argv) == 3:
        with open(sys.argv[2], "w", encoding="utf-8") as f:
            f.write(converted)
    else:
        sys.stdout.write(converted)


if __name__ == "__main__":
    main()
