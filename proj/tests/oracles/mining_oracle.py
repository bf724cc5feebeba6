"""Brute-force paraphrase mining over a canonical corpus file.

Reimplements tokenization, delexicalization, dialog functions, BLEU and edit
distance from the written rules, enumerates every ordered pair of user turns,
and writes the expected pairs, relaxation outcome and corpus counts.

usage: mining_oracle.py corpus.json out.json
"""
import json
import math
import re
import sys
from collections import Counter

BLEU_TH = 0.2
DIV_TH = 3.4
RELAX_STEP = 0.5
RELAX_FLOOR = 0.0

TOKEN = re.compile(r"\[[a-z0-9_\-]+\]|[!-/:-@\[-`{-~]|[^\s!-/:-@\[-`{-~]+")


def tokenize(text):
    out = []
    for m in TOKEN.finditer(text):
        tok = m.group(0)
        out.append(tok if tok.startswith("[") and len(tok) > 2 else tok.lower())
    return out


def placeholder_slot(tok):
    m = re.fullmatch(r"\[([a-z0-9_\-]+)\]", tok)
    return m.group(1) if m else None


def load(path):
    doc = json.load(open(path))
    slots = {}
    values = []  # (tokens, slot, domain, source)
    for domain, dj in doc["ontology"]["domains"].items():
        for slot, sj in dj.get("slots", {}).items():
            slots.setdefault(domain, {})[slot] = sj
            for v in sj.get("values", []):
                values.append((tuple(tokenize(v)), slot, domain, 1))
    for e in doc["database"]:
        for slot, sj in slots.get(e["domain"], {}).items():
            if sj.get("requestable") and not sj.get("informable") and e.get(slot):
                values.append((tuple(tokenize(e[slot])), slot, e["domain"], 1))
    values = sorted(set(values))
    return doc, slots, values


def delex(tokens, values, informed, domain):
    cands = list(values) + [(tuple(tokenize(v)), s, d, 0) for (d, s), v in informed.items()]
    out, i = [], 0
    while i < len(tokens):
        best = None
        if placeholder_slot(tokens[i]) is None:
            for toks, slot, dom, src in cands:
                if tuple(tokens[i:i + len(toks)]) != toks or not toks:
                    continue
                key = (-len(toks), src, dom != domain, slot)
                if best is None or key < best[0]:
                    best = (key, toks, slot)
        if best:
            out.append("[" + best[2] + "]")
            i += len(best[1])
        else:
            out.append(tokens[i])
            i += 1
    return out


def informed_of(state):
    return {(d, s): " ".join(tokenize(v)) for d, ss in state.get("informed", {}).items() for s, v in ss.items()}


def requested_of(state):
    return {(d, s) for d, ss in state.get("requested", {}).items() for s in ss}


def act_key(a):
    return a["act"] + ("-" + a["slot"] if a.get("slot") else "")


def bleu(hyp, ref):
    c, r = len(hyp), len(ref)
    logs = 0.0
    for n in range(1, 5):
        hc = Counter(tuple(hyp[i:i + n]) for i in range(c - n + 1))
        rc = Counter(tuple(ref[i:i + n]) for i in range(r - n + 1))
        m = sum(min(k, rc[g]) for g, k in hc.items())
        t = sum(hc.values())
        if m == 0:
            if n == 1:
                return 0.0
            m, t = 1, t + 1
        logs += math.log(m / t)
    bp = 0.0 if c > r else 1.0 - r / c
    return min(1.0, math.exp(logs / 4 + bp))


def edit(a, b):
    d = [[0] * (len(b) + 1) for _ in range(len(a) + 1)]
    for i in range(len(a) + 1):
        for j in range(len(b) + 1):
            if i == 0 or j == 0:
                d[i][j] = i + j
            else:
                d[i][j] = min(d[i - 1][j] + 1, d[i][j - 1] + 1, d[i - 1][j - 1] + (a[i - 1] != b[j - 1]))
    return d[-1][-1]


def main():
    doc, slots, values = load(sys.argv[1])
    turns = []  # (ref, function, delex tokens)
    for dlg in doc["dialogs"]:
        prev = None
        for t in dlg["turns"]:
            dom = t["domain"]
            informed = informed_of(t["state"])
            toks = delex(tokenize(t["user"]), values, informed, dom)
            mentioned = {placeholder_slot(x) for x in toks} - {None}
            mentioned = {s for s in mentioned if s in slots.get(dom, {})}
            before = requested_of(prev["state"]) if prev else set()
            mentioned |= {s for (d, s) in requested_of(t["state"]) - before if d == dom}
            acts = tuple(sorted({act_key(a) for a in prev["sys_acts"]})) if prev else ()
            turns.append(((dlg["id"], t["t"]), (dom, tuple(sorted(mentioned)), acts), toks))
            prev = t

    pairs = []
    for u in turns:
        for v in turns:
            if u[0] == v[0] or u[1] != v[1] or not u[2] or not v[2]:
                continue
            b, dv = bleu(v[2], u[2]), edit(u[2], v[2])
            if b >= BLEU_TH and dv >= DIV_TH:
                pairs.append({"src": list(u[0]), "tgt": list(v[0]), "bleu": b, "diversity": dv})
    pairs.sort(key=lambda p: (p["src"], p["tgt"]))

    covered = {tuple(p["src"]) for p in pairs}
    relaxed, orphans, fallback = [], [], []
    for u in turns:
        if u[0] in covered:
            continue
        mates = [v for v in turns if v[1] == u[1] and v[0] != u[0]]
        if not mates:
            orphans.append(list(u[0]))
            continue
        scored = [(v[0], bleu(v[2], u[2]), edit(u[2], v[2])) for v in mates]
        th, pick = DIV_TH, None
        while th > RELAX_FLOOR and pick is None:
            th = max(th - RELAX_STEP, RELAX_FLOOR)
            ok = [s for s in scored if s[1] >= BLEU_TH and s[2] >= th]
            if ok:
                pick = max(ok, key=lambda s: (s[2], [-ord(ch) for ch in s[0][0]], -s[0][1]))
        if pick is None:
            pick = max(scored, key=lambda s: (s[1], s[2], [-ord(ch) for ch in s[0][0]], -s[0][1]))
            fallback.append(list(u[0]))
        relaxed.append({"src": list(u[0]), "tgt": list(pick[0]), "bleu": pick[1], "diversity": pick[2]})
    relaxed.sort(key=lambda p: (p["src"], p["tgt"]))

    onto_slots = [(d, s, sj) for d, ss in slots.items() for s, sj in ss.items()]
    counts = {
        "dialogs": len(doc["dialogs"]),
        "turns": sum(len(d["turns"]) for d in doc["dialogs"]),
        "slots": len(onto_slots),
        "informable_slots": sum(1 for _, _, sj in onto_slots if sj.get("informable")),
        "requestable_slots": sum(1 for _, _, sj in onto_slots if sj.get("requestable")),
        "database_entities": len(doc["database"]),
        "buckets": len({t[1] for t in turns}),
    }
    out = {"pairs": pairs, "relaxed": relaxed, "orphans": sorted(orphans), "bleu_fallback": sorted(fallback),
           "counts": counts}
    json.dump(out, open(sys.argv[2], "w"), indent=1, sort_keys=True)
    print(json.dumps(counts), len(pairs), "pairs", len(relaxed), "relaxed", len(orphans), "orphans")


if __name__ == "__main__":
    main()
