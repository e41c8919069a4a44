#!/usr/bin/env python3
"""Regenerate the toy corpus under data/toy/.

A closed SOV -> SVO fragment with a fixed word-for-word lexicon. Design
points the tests rely on:

  * "ka" (genitive) and "to" (infinitive marker) are never aligned, so no
    phrase pair can cover them alone and glue chains cannot bypass them.
  * Common-noun genitives ("ghar ka darwaza" -> "door of house") outnumber
    proper-name possessives ("john ka kutta" -> "john 's dog") three to
    one, so an unlabeled grammar prefers the "of" reordering everywhere.
  * Every proper name is tagged PERSON in every sentence, so with grafted
    labels the possessive rule requires an NP-PERSON filler and the
    held-out "mary ka kutta" decodes correctly only in samt+sem mode.
  * One tag each exercises overlay (37), split insertion (44), and a
    crossing skip (46).

Run from the repository root: python3 tools/make_toy_corpus.py
"""

import os
import re

ROWS = []


def add(src, tgt, align, tree, tags=()):
    ROWS.append((src, tgt, align, tree, list(tags)))


def person(name):
    return (0, 1, "NE", "PERSON")


def a_row(subj, obj, verb, proper=False, tags=()):
    (ss, st), (os_, ot), (vs, vt) = subj, obj, verb
    pre = "NNP" if proper else "NN"
    add(
        f"{ss} {os_} {vs}",
        f"{st} {vt} {ot}",
        "0-0 1-2 2-1",
        f"(S (NP ({pre} {st})) (VP (VBZ {vt}) (NP (NN {ot}))))",
        tags,
    )


def b_row(subj, verb, proper=False, tags=()):
    (ss, st), (vs, vt) = subj, verb
    pre = "NNP" if proper else "NN"
    add(
        f"{ss} {vs}",
        f"{st} {vt}",
        "0-0 1-1",
        f"(S (NP ({pre} {st})) (VP (VBZ {vt})))",
        tags,
    )


def c_row(owner, owned):
    (ns, nt), (ms, mt) = owner, owned
    add(
        f"{ns} ka {ms}",
        f"{mt} of {nt}",
        "0-2 2-0",
        f"(NP (NP (NN {mt})) (PP (IN of) (NP (NN {nt}))))",
    )


def d_row(name, owned):
    ms, mt = owned
    add(
        f"{name} ka {ms}",
        f"{name} 's {mt}",
        "0-0 2-2",
        f"(NP (NP (NNP {name})) (POS 's) (NP (NN {mt})))",
        [person(name)],
    )


def e_row(subj, place, proper=True, extra=()):
    ss, st = subj
    ps, pt = place
    pre = "NNP" if proper else "NN"
    tags = ([person(ss)] if proper else []) + [(3, 4, "NE", "GPE")] + list(extra)
    add(
        f"{ss} {ps} me rehta",
        f"{st} lives in {pt}",
        "0-0 1-3 2-2 3-1",
        f"(S (NP ({pre} {st})) (VP (VBZ lives) (PP (IN in) (NP (NNP {pt})))))",
        tags,
    )


def f_row(subj, verb, proper=False):
    (ss, st), (vs, vt) = subj, verb
    pre = "NNP" if proper else "NN"
    tags = ([person(ss)] if proper else []) + [
        (1, 2, "TRIG", "Want"),
        (2, 4, "TARG", "Want"),
    ]
    add(
        f"{ss} {vs} chahta",
        f"{st} wants to {vt}",
        "0-0 1-3 2-1",
        f"(S (NP ({pre} {st})) (VP (VBZ wants) (S (VP (TO to) (VB {vt})))))",
        tags,
    )


def g_row(name, date_span):
    add(
        f"{name} 26 september 2009 milta",
        f"{name} meets 26 september 2009",
        "0-0 1-2 2-3 3-4 4-1",
        f"(S (NP (NNP {name})) (VP (VBZ meets) (NP (CD 26) (NNP september) (CD 2009))))",
        [person(name), (date_span[0], date_span[1], "NE", "DATE")],
    )


ADMI = ("admi", "man")
AURAT = ("aurat", "woman")
LARKA = ("larka", "boy")
LARKI = ("larki", "girl")
KUTTA = ("kutta", "dog")
BILLI = ("billi", "cat")
GHAR = ("ghar", "house")
DARWAZA = ("darwaza", "door")
BAZAR = ("bazar", "market")
SHAHAR = ("shahar", "city")
ROTI = ("roti", "bread")
PANI = ("pani", "water")
KITAB = ("kitab", "book")
SEB = ("seb", "apple")
MACHLI = ("machli", "fish")
PED = ("ped", "tree")
PHAL = ("phal", "fruit")
LUBNAN = ("lubnan", "lebanon")
KARACHI = ("karachi", "karachi")

KHATA = ("khata", "eats")
PITA = ("pita", "drinks")
PARHTA = ("parhta", "reads")
DEKHTA = ("dekhta", "sees")
SOTA = ("sota", "sleeps")
CHALTA = ("chalta", "walks")
TAIRTA = ("tairta", "swims")
TAIRNA = ("tairna", "swim")
PARHNA = ("parhna", "read")
CHALNA = ("chalna", "walk")


def name(n):
    return (n, n)


# 0-11: transitive SOV.
a_row(ADMI, ROTI, KHATA)
a_row(AURAT, PANI, PITA)
a_row(LARKA, KITAB, PARHTA)
a_row(LARKI, SEB, KHATA)
a_row(KUTTA, PANI, PITA)
a_row(BILLI, MACHLI, KHATA)
a_row(ADMI, KUTTA, DEKHTA)
a_row(AURAT, BILLI, DEKHTA)
a_row(name("john"), ROTI, KHATA, proper=True, tags=[person("john")])
a_row(name("mary"), KITAB, PARHTA, proper=True, tags=[person("mary")])
a_row(name("ali"), SEB, KHATA, proper=True, tags=[person("ali")])
a_row(name("sara"), PANI, PITA, proper=True, tags=[person("sara")])

# 12-16: intransitive.
b_row(ADMI, SOTA)
b_row(AURAT, CHALTA)
b_row(KUTTA, TAIRTA)
b_row(name("mary"), CHALTA, proper=True, tags=[person("mary")])
b_row(name("john"), TAIRTA, proper=True, tags=[person("john")])

# 17-28: common-noun genitives around unaligned "ka".
c_row(GHAR, DARWAZA)
c_row(SHAHAR, BAZAR)
c_row(PED, PHAL)
c_row(GHAR, KUTTA)
c_row(BAZAR, KUTTA)
c_row(SHAHAR, GHAR)
c_row(PED, GHAR)
c_row(GHAR, BILLI)
c_row(BAZAR, BILLI)
c_row(ADMI, KITAB)
c_row(AURAT, KITAB)
c_row(SHAHAR, DARWAZA)

# 29-32: proper-name possessives, same source shape as 17-28.
d_row("john", KUTTA)
d_row("ali", GHAR)
d_row("sara", BILLI)
d_row("john", KITAB)

# 33-37: locatives; 37 adds a LOCATION overlay on top of GPE.
e_row(name("john"), LUBNAN)
e_row(name("mary"), KARACHI)
e_row(name("ali"), LUBNAN)
e_row(ADMI, KARACHI, proper=False)
e_row(name("mary"), LUBNAN, extra=[(3, 4, "NE", "LOCATION")])

# 38-42: modality trigger/target over "wants to <verb>".
f_row(ADMI, TAIRNA)
f_row(LARKA, PARHNA)
f_row(name("mary"), TAIRNA, proper=True)
f_row(AURAT, CHALNA)
f_row(name("john"), PARHNA, proper=True)

# 43-44: dates; 43 grafts exactly, 44 needs a split insertion.
g_row("john", (2, 5))
g_row("ali", (3, 5))

# 45-49: fillers; 46 carries a crossing tag that must be skipped.
a_row(name("mary"), ROTI, KHATA, proper=True, tags=[person("mary")])
a_row(ADMI, DARWAZA, DEKHTA, tags=[(0, 2, "NE", "ORGANIZATION")])
a_row(LARKA, PANI, PITA)
a_row(name("sara"), KITAB, PARHTA, proper=True, tags=[person("sara")])
b_row(BILLI, SOTA)

HELDOUT = [
    ("mary ka kutta", "mary 's dog"),
    ("admi seb khata", "man eats apple"),
    ("larki pani pita", "girl drinks water"),
    ("sara lubnan me rehta", "sara lives in lebanon"),
    ("aurat tairna chahta", "woman wants to swim"),
    ("kutta sota", "dog sleeps"),
]


def main():
    out = os.path.join(os.path.dirname(__file__), "..", "data", "toy")
    os.makedirs(out, exist_ok=True)

    def write(filename, lines):
        with open(os.path.join(out, filename), "w") as f:
            f.write("".join(line + "\n" for line in lines))

    write("train.src", [src for src, _, _, _, _ in ROWS])
    write("train.tgt", [tgt for _, tgt, _, _, _ in ROWS])
    write("train.align", [align for _, _, align, _, _ in ROWS])
    write("train.trees", [tree for _, _, _, tree, _ in ROWS])
    tag_lines = []
    for i, (_, _, _, _, tags) in enumerate(ROWS):
        for start, end, kind, label in tags:
            tag_lines.append(f"{i}\t{start}\t{end}\t{kind}\t{label}")
    write("train.tags", tag_lines)
    write("heldout.src", [src for src, _ in HELDOUT])
    write("heldout.ref", [ref for _, ref in HELDOUT])

    for src, tgt, align, tree, tags in ROWS:
        leaves = [w for _, w in re.findall(r"\(([^()\s]+) ([^()\s]+)\)", tree)]
        assert leaves == tgt.split(), (tgt, tree)
        for start, end, _, _ in tags:
            assert 0 <= start < end <= len(leaves), (tgt, start, end)
    print(f"wrote {len(ROWS)} sentences, {len(tag_lines)} tags, {len(HELDOUT)} held-out")


if __name__ == "__main__":
    main()
