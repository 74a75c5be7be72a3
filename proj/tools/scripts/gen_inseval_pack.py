#!/usr/bin/env python3
"""Writes data/inseval_prompts.json, the reconstructed Inseval prompt pack."""
import itertools
import json
import sys

SUBJECTS = ["cat", "dog", "horse", "bird", "person", "car", "boat", "elephant", "sheep", "cow",
            "bicycle", "bus", "train", "airplane", "bench", "truck", "rabbit", "fox", "owl", "deer",
            "panda", "turtle", "duck", "goat", "bear"]
ACTIONS = ["jumping over a log", "running in circles", "spinning around", "climbing a hill", "rolling on the grass",
           "turning left", "backing up slowly", "waving", "dancing", "leaping into water"]
COLORS = ["purple", "bright green", "pink", "orange", "turquoise", "crimson", "golden", "lavender", "teal", "magenta"]
SHAPES = ["cube-shaped", "triangular", "star-shaped", "perfectly spherical", "pyramid-shaped", "flat as a disc",
          "heart-shaped", "cylindrical", "hexagonal", "crescent-shaped"]
TEXTURES = ["made of glass", "covered in knitted wool", "made of polished marble", "carved from wood",
            "made of shiny chrome", "covered in moss", "made of cracked clay", "made of crumpled paper",
            "covered in fish scales", "made of ice"]
DETAILS = ["wearing a red scarf", "with a tiny top hat", "wearing round glasses", "with a blue bow tie",
           "carrying a small backpack", "with a golden bell on its collar", "wearing striped socks",
           "with a flower behind its ear", "wearing a yellow raincoat", "with a silver crown"]


def art(word):
    return "An" if word[0] in "aeiou" else "A"


def single(dim, attrs, n, verb_fn):
    out = []
    for i in range(n):
        s = SUBJECTS[i % len(SUBJECTS)]
        a = attrs[(i * 3) % len(attrs)]
        out.append({"id": f"{dim.lower()}-{i + 1:02d}", "dimension": dim, "prompt": verb_fn(s, a),
                    "targets": [{"entity": s, "attribute": a}], "answer": f"The {s} is {a}."})
    return out


def multiple(dim, attrs, n, verb_fn):
    out = []
    pairs = list(itertools.combinations(range(len(SUBJECTS)), 2))
    for i in range(n):
        s1, s2 = (SUBJECTS[j] for j in pairs[(i * 7) % len(pairs)])
        a1, a2 = attrs[i % len(attrs)], attrs[(i + 3) % len(attrs)]
        out.append({"id": f"{dim.lower()}-{i + 1:02d}", "dimension": dim,
                    "prompt": f"{verb_fn(s1, a1)} next to {verb_fn(s2, a2)[0].lower()}{verb_fn(s2, a2)[1:]}",
                    "targets": [{"entity": s1, "attribute": a1}, {"entity": s2, "attribute": a2}],
                    "answer": f"The {s1} is {a1} and the {s2} is {a2}."})
    return out


def main(path):
    is_ = lambda s, a: f"{art(s)} {s} {a}"
    col = lambda s, a: f"{art(a)} {a} {s}"
    prompts = []
    prompts += single("Single-Action", ACTIONS, 25, is_)
    prompts += single("Single-Color", COLORS, 25, col)
    prompts += single("Single-Shape", SHAPES, 25, col)
    prompts += single("Single-Texture", TEXTURES, 25, is_)
    prompts += single("Single-Detail", DETAILS, 15, is_)
    prompts += multiple("Multiple-Action", ACTIONS, 25, is_)
    prompts += multiple("Multiple-Color", COLORS, 25, col)
    prompts += multiple("Multiple-Texture", TEXTURES, 25, is_)
    prompts += multiple("Multiple-Shape", SHAPES, 10, col)
    prompts += multiple("Multiple-Detail", DETAILS, 10, is_)
    pack = {
        "version": 1,
        "note": "Reconstructed pack. Shapes are deliberately counter-intuitive.",
        "judge": {
            "system": "You are a strict evaluator of generated videos. Look at the frames carefully and answer only from what is visible.",
            "question": "The video was generated from the prompt: \"{{prompt}}\".\nStep 1: Is there a {{entity}} in the video?\nStep 2: If so, describe what the {{entity}} looks like and what it does.\nStep 3: Is the {{entity}} {{attribute}}?\nThink through the steps, then end with a final line \"ANSWER: yes\" or \"ANSWER: no\".",
            "detail_question": "The video was generated from the prompt: \"{{prompt}}\".\nStep 1: Is there a {{entity}} in the video?\nStep 2: Look closely at small details on the {{entity}}: accessories, clothing and markings.\nStep 3: Is the {{entity}} {{attribute}}, with that detail clearly visible?\nThink through the steps, then end with a final line \"ANSWER: yes\" or \"ANSWER: no\".",
            "retry": "Please end your reply with a final line that is exactly \"ANSWER: yes\" or \"ANSWER: no\"."
        },
        "prompts": prompts,
    }
    with open(path, "w") as f:
        json.dump(pack, f, indent=2)
        f.write("\n")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "data/inseval_prompts.json")
