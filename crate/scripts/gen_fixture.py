"""Writes the keyword-separable fixture: label 1 iff the document mentions "budget"."""
import json
import random
import sys

FILLERS = """airport athlete autumn bank bridge canyon castle coach coast council county court
crowd desert doctor farm festival forest garden harbor hospital island judge lawyer library
meadow minister morning mountain museum nurse ocean office orchard parade park pilot police
prairie rain river road school snow stadium station storm street student summer teacher
theater traffic tunnel valley village weather winter""".split()
KEYWORD = "budget"


def doc(rng, positive):
    words = rng.sample(FILLERS, rng.randint(9, 13))
    if positive:
        for _ in range(4):
            words.insert(rng.randint(0, len(words)), KEYWORD)
    words[0] = words[0].capitalize()
    return " ".join(words) + "."


def main(out):
    rng = random.Random(7)
    labels = [0] * 100 + [1] * 100
    rng.shuffle(labels)
    with open(out, "w") as f:
        for i, y in enumerate(labels):
            rec = {"id": f"fx{i:03d}", "content": doc(rng, y == 1), "label": y}
            f.write(json.dumps(rec) + "\n")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "crates/core/data/fixture_separable.jsonl")
