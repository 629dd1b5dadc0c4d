#!/usr/bin/env python3
"""Synthetic desk-scale corpus: 500 instances over five answerable templates
plus a noise template, and one explanation per template.

Each answerable template has a canonical surface (strictly matched by its
teacher), loosened surfaces (softly matched) and a surface the teacher cannot
reach. Every instance carries its gold answer so held-out F1 can be measured.

    python3 tools/make_synthetic.py [--out data/synthetic] [--seed 7] [--n 500]
"""
import argparse
import json
import os
import random

TOWNS = ["Harlow", "Dunmore", "Ashby", "Kelso", "Marston", "Brixley", "Tolland", "Wexham", "Corby", "Linford",
         "Redcliff", "Elston", "Haverley", "Norwick", "Ostrey", "Pellam"]
EVENTS = ["festival", "conference", "tournament", "ceremony", "parade", "concert", "marathon", "summit", "fair",
          "regatta"]
VENUES = ["Central Hall", "Mercer Park", "the old stadium", "Grange Square", "the town hall"]
MONTHS = ["January", "February", "March", "April", "May", "June", "July", "August", "September", "October",
          "November", "December"]
FIRST = ["Alice", "Bernard", "Clara", "Dmitri", "Elena", "Felix", "Greta", "Hugo", "Irene", "Jonas", "Karla",
         "Lionel", "Marta", "Nils", "Olga", "Pavel", "Rosa", "Stefan", "Tilda", "Viktor"]
LAST = ["Ashworth", "Brennan", "Castell", "Dorsey", "Ekman", "Falk", "Garrow", "Holm", "Ivers", "Jansen", "Kovac",
        "Lindqvist", "Moreau", "Novak", "Orsini", "Petrov", "Quill", "Rasmus", "Sorel", "Thorne"]
ORG_A = ["Acme", "Borealis", "Cinder", "Delta", "Ember", "Fulcrum", "Granite", "Helix", "Ion", "Juniper", "Keystone",
         "Lumen"]
ORG_B = ["Robotics", "Foods", "Records", "Motors", "Labs", "Textiles", "Airways", "Press"]
THINGS = ["bridges", "museums", "parks", "libraries", "churches", "towers", "harbours", "theatres", "schools",
          "fountains"]
ADJS = ["historic", "public", "famous", "ancient", "modern"]
PRIZES = ["Harmon", "Lorimer", "Castellan", "Whitcombe", "Ardent", "Sterling", "Maddox", "Orwell", "Penrose",
          "Vance"]
FIELDS = ["poetry", "physics", "painting", "architecture", "chemistry", "journalism"]
CITIES = ["Lisbon", "Krakow", "Bergen", "Tallinn", "Porto", "Ghent", "Lyon", "Graz", "Turku", "Bremen", "Malmo",
          "Split", "Bruges", "Leipzig"]
STUDY = ["botany", "geology", "linguistics", "astronomy", "economics", "zoology"]
UNIS = ["Uppsala", "Padua", "Leiden", "Coimbra", "Heidelberg"]

FILLERS = [
    "The weather that year was unusually mild.",
    "Local newspapers covered the story for weeks.",
    "Several visitors arrived from {town} by train.",
    "A new road to {town} opened on {date}.",
    "{person} later wrote about the period in a memoir.",
    "The committee met again in {year} to review the budget.",
    "Attendance figures were never published.",
    "The {town} council approved {num} new projects.",
]


def date(rng):
    return f"{rng.randint(1, 28)} {rng.choice(MONTHS)} {rng.randint(1850, 2015)}"


def person(rng):
    return f"{rng.choice(FIRST)} {rng.choice(LAST)}"


def year(rng):
    return str(rng.randint(1850, 2015))


def filler(rng):
    return rng.choice(FILLERS).format(town=rng.choice(TOWNS), date=date(rng), person=person(rng), year=year(rng),
                                      num=rng.randint(2, 40))


def assemble(rng, main, answer, n_fill):
    """Context with the main sentence among fillers; returns (context, char_start)."""
    sentences = [filler(rng) for _ in range(n_fill)]
    pos = rng.randint(0, n_fill)
    sentences.insert(pos, main)
    context = " ".join(sentences)
    offset = context.index(main) + main.index(answer)
    return context, offset


# Each template returns (question, main sentence, answer, variant).
def t_event(rng, variant):
    town, event, d = rng.choice(TOWNS), rng.choice(EVENTS), date(rng)
    q = f"When was the {town} {event} held?"
    if variant == "strict":
        main = rng.choice([f"The {town} {event} was held on {d}.",
                           f"After months of planning, the {town} {event} was held on {d}."])
    elif variant == "soft":
        venue = rng.choice(VENUES)
        main = rng.choice([f"The {town} {event} was held in {venue} on {d}.",
                           f"The {town} {event} was held as usual on {d}."])
    else:
        main = f"On {d}, organizers opened the {town} {event}."
    return q, main, d


def t_founder(rng, variant):
    org, who, y = f"{rng.choice(ORG_A)} {rng.choice(ORG_B)}", person(rng), year(rng)
    q = f"Who founded {org}?"
    if variant == "strict":
        main = f"{org} was founded by {who} in {y}."
    elif variant == "soft":
        main = rng.choice([f"{org} was founded in {y} by {who}.", f"{org} was founded by engineer {who} in {y}."])
    else:
        main = f"{who} started {org} in {y}."
    return q, main, who


def t_count(rng, variant):
    place, things, n = rng.choice(TOWNS), rng.choice(THINGS), str(rng.randint(2, 60))
    q = f"How many {things} does {place} have?"
    if variant == "strict":
        main = f"{place} has {n} {things}."
    elif variant == "soft":
        main = f"{place} has {n} {rng.choice(ADJS)} {things}."
    else:
        main = f"The number of {things} in {place} is {n}."
    return q, main, n


def t_award(rng, variant):
    who, award, y = person(rng), f"{rng.choice(PRIZES)} Prize", year(rng)
    q = f"In what year did {who} win the {award}?"
    if variant == "strict":
        main = f"{who} won the {award} in {y}."
    elif variant == "soft":
        main = rng.choice([f"{who} won the {award} for {rng.choice(FIELDS)} in {y}.",
                           f"{who} won the {award} in early {y}."])
    else:
        main = f"In {y}, the {award} went to {who}."
    return q, main, y


def t_birth(rng, variant):
    who, city, y = person(rng), rng.choice(CITIES), year(rng)
    q = f"Where was {who} born?"
    if variant == "strict":
        main = f"{who} was born in {city} in {y}."
    elif variant == "soft":
        main = rng.choice([f"{who} was born at home in {city} in {y}.",
                           f"{who} was born in central {city} in {y}."])
    else:
        main = f"{who} grew up in {city}, where the family had moved in {y}."
    return q, main, city


def t_noise(rng, _variant):
    who, field = person(rng), rng.choice(STUDY)
    q = f"What does {who} study?"
    main = f"{who} studies {field} at {rng.choice(UNIS)}."
    return q, main, field


TEMPLATES = [("event", t_event), ("founder", t_founder), ("count", t_count), ("award", t_award),
             ("birth", t_birth)]

# Canonical reference instances, one per template, with their explanations.
REFERENCES = [
    ("event", "When was the Harlow festival held?", "The Harlow festival was held on 3 May 1921.", "3 May 1921",
     "X is \"festival\". Y is \"held\". In the question Y is directly after X. \"on\" is directly before the answer. "
     "Y is within 2 words before the answer. The answer should be a date."),
    ("founder", "Who founded Acme Robotics?", "Acme Robotics was founded by Alice Brennan in 1961.", "Alice Brennan",
     "X is \"founded\". \"by\" is directly before the answer. X is within 2 words before the answer. "
     "The question starts with \"who\", so the answer should be a person."),
    ("count", "How many bridges does Kelso have?", "Kelso has 12 bridges.", "12",
     "X is \"bridges\". The question starts with \"how many\", so the answer should be a number. "
     "The answer is directly before X."),
    ("award", "In what year did Hugo Falk win the Harmon Prize?", "Hugo Falk won the Harmon Prize in 1977.", "1977",
     "X is \"Harmon Prize\". The question starts with \"In what year\", so the answer should be a year. "
     "\"in\" is directly before the answer. X is within 2 words before the answer."),
    ("birth", "Where was Clara Holm born?", "Clara Holm was born in Bergen in 1902.", "Bergen",
     "X is \"born\". \"in\" is directly before the answer. X is within 2 words before the answer. "
     "The question starts with \"where\", so the answer should be a location."),
]


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default=os.path.join(os.path.dirname(__file__), "..", "data", "synthetic"))
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--n", type=int, default=500)
    args = ap.parse_args()
    rng = random.Random(args.seed)

    rows, expls = [], []
    for name, q, main_s, ans, text in REFERENCES:
        rid = f"ref-{name}"
        rows.append({"id": rid, "question": q, "context": main_s,
                     "gold": {"char_start": main_s.index(ans), "char_end": main_s.index(ans) + len(ans)}})
        expls.append({"id": f"e-{name}", "instance_id": rid, "text": text})

    i = 0
    while len(rows) < args.n:
        if rng.random() < 0.12:
            name, fn = "noise", t_noise
        else:
            name, fn = rng.choice(TEMPLATES)
        variant = rng.choices(["strict", "soft", "hard"], weights=[0.2, 0.55, 0.25])[0]
        q, main_s, ans = fn(rng, variant)
        context, start = assemble(rng, main_s, ans, rng.randint(0, 2))
        rows.append({"id": f"syn-{i:04d}-{name}-{variant}", "question": q, "context": context,
                     "gold": {"char_start": start, "char_end": start + len(ans)}})
        i += 1

    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "corpus.jsonl"), "w") as f:
        for r in rows:
            f.write(json.dumps(r) + "\n")
    with open(os.path.join(args.out, "explanations.jsonl"), "w") as f:
        for e in expls:
            f.write(json.dumps(e) + "\n")


if __name__ == "__main__":
    main()
