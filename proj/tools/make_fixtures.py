"""Writes data/fixtures/{corpus,explanations}.jsonl from the literals below.

Gold offsets are code-point offsets of the first occurrence of the answer
text in the context.
"""
import json
import pathlib

ROOT = pathlib.Path(__file__).resolve().parent.parent / "data" / "fixtures"

CORPUS = [
    ("funeral", "When was Queen Victoria's funeral held?",
     "Her funeral was held on Saturday, 2 February, in St George's Chapel, Windsor Castle, and after two days "
     "of lying-in-state she was interred beside Prince Albert.",
     "Saturday, 2 February"),
    ("independence", "When was independence declared?",
     "After years of armed struggle the movement controlled most of the countryside. "
     "Independence was declared on 24 September 1973.",
     "24 September 1973"),
    ("brazelton", "When was Brazelton killed?",
     "Brazelton was eventually tracked down and killed on Monday August 19, 1878, in a mesquite bosque "
     "along the Santa Cruz River.",
     "Monday August 19, 1878"),
    ("filmfest", "In what year did Film Fest New Haven begin?",
     "The Film Fest New Haven has been held annually since 1995.",
     "1995"),
    ("music", "In what year did the Music of the Night begin?",
     "Since 1992 the Music of the Night has been performed in the Royal Citadel by the 29 Commando Regiment "
     "and local performers to raise money for local and military charities.",
     "1992"),
    ("estonia", "Who did Estonia rebel against in 1343?",
     "In 1343, the people of northern Estonia and Saaremaa rebel against German rule in the St. George's "
     "Night Uprising, which was put down by 1345.",
     "German rule"),
    ("slavs", "The Slavs appeared on whose borders around the 6th century?",
     "Around the 6th century, Slavs appeared on Byzantine borders in great numbers.",
     "Byzantine borders"),
    ("hydrogen", "Where is hydrogen highly soluble?",
     "Hydrogen is highly soluble in many rare earth and transition metals and is soluble in both "
     "nanocrystalline and amorphous metals.",
     "many rare earth and transition metals"),
    ("divinity", "Where is the divinity herself purified?",
     "Afterwards the car, the vestments, and, if you like to believe it, the divinity herself, are purified "
     "in a secret lake.",
     "a secret lake"),
    ("capital", "What is the capital of France?",
     "Paris is the capital and most populous city of France.",
     "Paris"),
    ("moons", "How many moons does Mars have?",
     "Mars has two small moons, Phobos and Deimos, which may be captured asteroids.",
     "two"),
    ("war", "When did the war end?",
     "The war ended in 1945 after six years of fighting.",
     "1945"),
    ("treaty", "When was the treaty signed?",
     "Negotiations dragged on for months. The treaty was finally signed in Paris by both delegations.",
     "Paris"),
    ("hamlet", "Who wrote Hamlet?",
     "Hamlet was written by William Shakespeare around 1600.",
     "William Shakespeare"),
]

EXPLANATIONS = [
    ("e-funeral", "funeral",
     'X is "funeral". Y is "held". In the question X is within 4 words after "when was" and Y is directly '
     'after X. "on" is directly before the answer. Y is within 2 words before the answer. X is within 3 words '
     'left of Y. The question starts with "when", so the answer should be a date.'),
    ("e-filmfest", "filmfest",
     'X is "Film Fest New Haven". The question starts with "In what year", so the answer should be a year. '
     '"begin" is in the question. X is directly after "did" and directly before "begin" in the question. '
     '"since" is directly before the answer.'),
    ("e-estonia", "estonia",
     'X is "Estonia". Y is "rebel against". Z is "1343". In the question, Y is directly after X and Z is '
     'within 2 words after Y. Z is a year. The answer directly follows Y. X is within 3 words before Y.'),
    ("e-hydrogen", "hydrogen",
     'X is "hydrogen". Y is "highly soluble". Y is directly after X and X is directly after "where is" in the '
     'question. X is within 5 words before Y. Y is within 2 words before the answer. "in" directly before the '
     'answer. "is" is between X and Y.'),
]


def main():
    ROOT.mkdir(parents=True, exist_ok=True)
    with open(ROOT / "corpus.jsonl", "w", encoding="utf-8") as f:
        for iid, q, c, a in CORPUS:
            start = c.index(a)
            row = {"id": iid, "question": q, "context": c, "gold": {"char_start": start, "char_end": start + len(a)}}
            f.write(json.dumps(row, ensure_ascii=False) + "\n")
    with open(ROOT / "explanations.jsonl", "w", encoding="utf-8") as f:
        for eid, iid, text in EXPLANATIONS:
            f.write(json.dumps({"id": eid, "instance_id": iid, "text": text}, ensure_ascii=False) + "\n")


if __name__ == "__main__":
    main()
