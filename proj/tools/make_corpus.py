#!/usr/bin/env python3
"""Writes a seeded synthetic English-like corpus, one sentence per line.

The bundled data/corpus.txt is produced by `python3 tools/make_corpus.py`;
rerunning with the same seed and size reproduces it byte for byte.
"""
import argparse
import random

NAMES = """Anna Ben Clara David Edith Frank Grace Henry Irene Jack Kate Louis Mary Nora
Oliver Peter Rose Samuel Thomas Ursula Victor Walter Alice Bertha Charles Daisy Edward
Florence George Harriet Isaac Julia Martha Arthur Emma Hugh Lucy Philip Ruth Simon""".split()

NOUNS = """man woman child boy girl house garden river road city village door window table
letter book horse dog cat bird tree field hill mountain ship sea island king queen
captain doctor teacher farmer soldier friend brother sister mother father uncle aunt
morning evening night day week year winter summer spring autumn storm rain wind fire
light voice hand face heart mind story song question answer money bread water wine
room church school market station bridge forest lake valley stone wall gate street
army people family servant master stranger neighbour lady gentleman merchant judge
clock candle lamp chair bed coat hat boat train horse carriage paper pen word name""".split()

ADJECTIVES = """old young little great small large long short dark bright cold warm quiet
strange poor rich happy sad kind cruel brave tired quick slow early late heavy light
gentle proud silent empty full famous simple pale green white black red golden grey
narrow wide deep shallow distant near honest clever foolish wild calm busy lonely""".split()

VERBS_PAST = """walked ran looked came went saw heard found took gave told asked answered
turned stood sat waited called wrote read opened closed began left reached carried
followed watched remembered forgot believed thought knew felt seemed wanted tried
laughed smiled cried spoke listened moved stopped returned passed crossed climbed""".split()

TRANSITIVE = """saw heard found took gave told asked opened closed left reached carried
followed watched remembered forgot knew wanted met loved helped thanked visited
bought sold kept lost brought sent showed painted built broke""".split()

ADVERBS = """slowly quickly quietly suddenly softly gladly nearly always never often
sometimes again already still only almost perhaps indeed certainly""".split()

PREPS = """in on at by near under over behind before after across through toward from
with without beside beyond along""".split()

PRONOUNS = "He She It They We I You".split()
DETS = "the a this that every no one some his her their my our".split()
AUX = "would could should might must will can shall".split()
BASE = """go come see hear find take give tell ask open close leave reach carry follow
watch remember forget know feel want try speak listen move stop return pass cross""".split()
OPENERS = """When If After Before While Although Because Once Since Until As""".split()
QUESTIONS = "Where What Why How Who When Which".split()


def noun_phrase(r):
    det = r.choice(DETS)
    if r.random() < 0.45:
        return f"{det} {r.choice(ADJECTIVES)} {r.choice(NOUNS)}"
    return f"{det} {r.choice(NOUNS)}"


def subject(r):
    x = r.random()
    if x < 0.3:
        return r.choice(NAMES)
    if x < 0.55:
        return r.choice(PRONOUNS)
    np = noun_phrase(r)
    return np[0].upper() + np[1:]


def clause(r, subj=None):
    subj = subj or subject(r)
    x = r.random()
    if x < 0.35:
        s = f"{subj} {r.choice(TRANSITIVE)} {noun_phrase(r)}"
    elif x < 0.6:
        s = f"{subj} {r.choice(VERBS_PAST)} {r.choice(PREPS)} {noun_phrase(r)}"
    elif x < 0.8:
        s = f"{subj} {r.choice(AUX)} {r.choice(BASE)} {r.choice(PREPS)} {noun_phrase(r)}"
    else:
        be = "were" if subj in ("We", "They", "You") else "was"
        s = f"{subj} {be} {r.choice(ADJECTIVES)}"
    if r.random() < 0.3:
        s += " " + r.choice(ADVERBS)
    return s


def lower_first(s):
    return s if s.split()[0] in NAMES or s.startswith("I ") else s[0].lower() + s[1:]


def sentence(r):
    x = r.random()
    if x < 0.5:
        s = clause(r) + "."
    elif x < 0.65:
        s = f"{r.choice(OPENERS)} {lower_first(clause(r))}, {lower_first(clause(r))}."
    elif x < 0.78:
        s = f"{clause(r)}, and {lower_first(clause(r))}."
    elif x < 0.88:
        q = r.choice(QUESTIONS)
        s = f"{q} {r.choice(AUX)} {lower_first(subject(r))} {r.choice(BASE)} {noun_phrase(r)}?"
    else:
        s = f"\"{clause(r)},\" said {r.choice(NAMES)}."
    return s


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=2016)
    ap.add_argument("--bytes", type=int, default=1_000_000)
    ap.add_argument("--out", default="data/corpus.txt")
    args = ap.parse_args()
    r = random.Random(args.seed)
    total = 0
    with open(args.out, "w", encoding="utf-8", newline="\n") as f:
        while total < args.bytes:
            line = sentence(r) + "\n"
            f.write(line)
            total += len(line.encode("utf-8"))


if __name__ == "__main__":
    main()
