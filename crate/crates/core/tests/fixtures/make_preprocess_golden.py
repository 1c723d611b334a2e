"""Regenerates preprocess_golden.jsonl.

The expected text is computed here with a regular expression, independently
of the Rust implementation: title and body are joined by one space, every run
of spaces, tabs, CR and LF becomes one space, and the ends are trimmed.
"""
import json
import random
import re

WS = re.compile(r"[ \t\r\n]+")


def expected(title, body):
    return WS.sub(" ", title + " " + body).strip(" ")


FIXED = [
    ("", ""),
    ("Crash on start", ""),
    ("", "Body only"),
    ("I think I found a bug!", "Steps:\n1. open\n2. click"),
    ("Windows\r\nline", "ends\r\nhere\r\n"),
    ("Old\rMac", "line\rends"),
    ("tabs\tin\ttitle", "\tleading tab"),
    ("   padded   ", "   "),
    ("\n\n\n", "\r\n\r\n"),
    ("mixed \t\r\n runs", "a \n\t b"),
    ("trailing space ", " leading space"),
    ("unicode café", "naïve — test"),
    ("emoji 🐛 bug", "body\twith 🚀"),
    ("a", "b"),
    (" ", " "),
    ("\t", "\n"),
    ("Feature: add dark mode", "It would be nice\r\n\r\nThanks"),
    ("How do I?", "   \t   "),
    ("x" * 40, "y" * 40),
    ("code `a  b`", "```\n  indented\n```"),
]

PIECES = ["word", "Bug", "crash", "é", "123", "!", "?", "()", "a-b", "😀"]
SEPS = [" ", "  ", "\t", "\n", "\r", "\r\n", " \t ", "\n\n", "\r\n\r\n", "\t\t"]


def random_field(rng):
    if rng.random() < 0.15:
        return ""
    parts = []
    for _ in range(rng.randint(1, 6)):
        if rng.random() < 0.4:
            parts.append(rng.choice(SEPS))
        parts.append(rng.choice(PIECES))
    if rng.random() < 0.4:
        parts.append(rng.choice(SEPS))
    return "".join(parts)


def main():
    rng = random.Random(1234)
    cases = list(FIXED)
    while len(cases) < 50:
        cases.append((random_field(rng), random_field(rng)))
    with open("preprocess_golden.jsonl", "w", encoding="utf-8") as f:
        for title, body in cases:
            f.write(json.dumps({"title": title, "body": body, "text": expected(title, body)}, ensure_ascii=False) + "\n")


if __name__ == "__main__":
    main()
