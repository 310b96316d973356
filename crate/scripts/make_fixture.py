"""Regenerates crates/core/data/fixtures/medical_500.jsonl (deterministic)."""
import json
import random
from pathlib import Path

rng = random.Random(7)

DISEASES = ["cancer"] * 12 + ["diabetes", "asthma", "influenza", "pneumonia", "hepatitis",
            "arthritis", "migraine", "disease", "diseases", "illness", "illnesses",
            "infection", "infections", "disorder", "disorders", "hiv", "syphilis", "herpes", "chlamydia", "gonorrhea"]
BODY = ["heart", "lung", "lungs", "liver", "kidney", "kidneys", "skin", "brain", "stomach",
        "throat", "knee", "knees", "shoulder", "shoulders", "back"]
MEDS = ["ibuprofen", "aspirin", "insulin", "antibiotic", "antibiotics", "paracetamol",
        "vaccine", "vaccines", "vaccination", "statins", "antihistamine", "antihistamines"]
SYMPTOMS = ["fever", "cough", "headache", "headaches", "nausea", "fatigue", "rash", "rashes",
            "pain", "swelling", "dizziness"]
PEOPLE = ["doctor", "physician", "nurse", "pharmacist", "specialist", "cardiologist",
          "dermatologist", "neurologist"]
PEOPLE_PL = ["doctors", "physicians", "nurses", "pharmacists", "specialists"]
DOSES = ["200", "400", "500", "1000", "2", "3", "10"]
UNITS = ["mg", "tablets", "days", "weeks", "hours"]

TEMPLATES = [
    "If you have {d} and {s}, talk to your {p} about {m}.",
    "Persistent {s} in the {b} can be a sign of {d}; please see a {p}.",
    "Most {pp} recommend {n} {u} of {m} for mild {s}.",
    "{D} affects the {b} and may cause {s} and {s2}.",
    "Early screening for {d} helps your {p} protect your {b}.",
    "Take {m} with food; {n} {u} is the usual limit before asking a {p}.",
    "Symptoms like {s}, {s2} or {s3} should be checked for {d}.",
    "Your {b} and {b2} recover faster when {d} is treated with {m}.",
    "A {p} may test for {d} or {d2} if the {s} lasts {n} {u}.",
    "Never combine {m} and {m2} without asking a {p}.",
]


def fill(t):
    d, d2 = rng.sample(DISEASES, 2)
    s, s2, s3 = rng.sample(SYMPTOMS, 3)
    b, b2 = rng.sample(BODY, 2)
    m, m2 = rng.sample(MEDS, 2)
    return t.format(d=d, D=d.capitalize(), d2=d2, s=s, s2=s2, s3=s3, b=b, b2=b2, m=m, m2=m2,
                    p=rng.choice(PEOPLE), pp=rng.choice(PEOPLE_PL), n=rng.choice(DOSES), u=rng.choice(UNITS))


out = Path(__file__).resolve().parent.parent / "crates/core/data/fixtures/medical_500.jsonl"
with out.open("w") as f:
    for _ in range(500):
        f.write(json.dumps({"text": fill(rng.choice(TEMPLATES))}) + "\n")
