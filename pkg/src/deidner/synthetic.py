"""Seeded generator of synthetic clinical notes with exact PHI annotations.

Notes are stitched from sentence templates whose ``{TYPE}`` slots are filled
from small surrogate pools.  Annotation offsets are recorded while the text
is built, so they are exact by construction.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field

from .corpus import AnnotatedDocument, EntityAnnotation
from .numeric.rng import SeededRng
from .tokenizer import RawDocument

FIRST_NAMES = [
    "Sam", "Maria", "John", "Linda", "Robert", "Susan", "Michael", "Karen", "David", "Nancy",
    "James", "Lisa", "William", "Betty", "Richard", "Helen", "Joseph", "Sandra", "Thomas", "Donna",
    "Charles", "Carol", "Daniel", "Ruth", "Matthew", "Sharon", "Anthony", "Michelle", "Mark", "Laura",
    "Paul", "Sarah", "Steven", "Kimberly", "Andrew", "Deborah", "Kevin", "Jessica", "Brian", "Shirley",
    "Clarence", "Dorothy", "Ahmed", "Priya", "Wei", "Olga", "Pedro", "Fatima", "Hiroshi", "Amara",
]
LAST_NAMES = [
    "Lee", "Smith", "Johnson", "Williams", "Brown", "Jones", "Garcia", "Miller", "Davis", "Rodriguez",
    "Martinez", "Hernandez", "Lopez", "Gonzalez", "Wilson", "Anderson", "Thomas", "Taylor", "Moore", "Jackson",
    "Martin", "Thompson", "White", "Harris", "Sanchez", "Clark", "Ramirez", "Lewis", "Robinson", "Walker",
    "Young", "Allen", "King", "Wright", "Scott", "Torres", "Nguyen", "Hill", "Flores", "Green",
    "Adams", "Nelson", "Baker", "Hall", "Rivera", "Campbell", "Mitchell", "Carter", "Roberts", "Hess",
    "Okafor", "Kowalski", "Tanaka", "Patel", "Schmidt", "Ivanova", "Haddad", "Silva", "Chen", "Murphy",
]
PROFESSIONS = [
    "teacher", "carpenter", "nurse", "accountant", "electrician", "plumber", "lawyer", "engineer",
    "mechanic", "farmer", "firefighter", "pharmacist", "librarian", "chef", "cashier", "pilot",
    "truck driver", "bus driver", "police officer", "social worker", "dentist", "architect",
]
HOSPITALS = [
    "Rhode Island Hospital", "Miriam Hospital", "Kent County Hospital", "Women and Infants Hospital",
    "Butler Hospital", "Roger Williams Medical Center", "Newport Hospital", "Landmark Medical Center",
    "Westerly Hospital", "Memorial Hospital", "Saint Anne Hospital", "Bradley Hospital",
    "General Hospital", "Mercy Medical Center",
]
CITIES = [
    "Providence", "Cranston", "Warwick", "Pawtucket", "Boston", "Worcester", "Hartford", "Newport",
    "Bristol", "Woonsocket", "Springfield", "Fall River", "New Bedford", "Westerly", "Lincoln",
    "Smithfield", "Barrington", "Johnston", "Coventry", "Middletown",
]
STATES = [
    "RI", "MA", "CT", "NY", "NH", "VT", "ME", "Rhode Island", "Massachusetts", "Connecticut",
    "New York", "Maine",
]
STREET_NAMES = [
    "Main", "Elm", "Oak", "Maple", "Broad", "Hope", "Angell", "Thayer", "Benefit", "Wickenden",
    "Smith", "Chalkstone", "Atwells", "Westminster", "Washington", "Pine", "Cedar", "Park",
]
STREET_SUFFIXES = ["Street", "Avenue", "Road", "Lane", "Drive", "Boulevard"]
NAME_ONSETS = ["b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "br", "ch", "sh", "tr", "kl"]
NAME_VOWELS = ["a", "e", "i", "o", "u", "ai", "ou", "ei"]
NAME_CODAS = ["", "", "n", "r", "s", "l", "th", "nd", "ck"]
EMAIL_DOMAINS = ["example.org", "mail.com", "health.net", "clinic.org", "inbox.com"]
MONTHS = [
    "January", "February", "March", "April", "May", "June", "July", "August", "September",
    "October", "November", "December",
]

PHI_TYPES = [
    "PATIENT", "DOCTOR", "PROFESSION", "HOSPITAL", "CITY", "STATE", "STREET", "ZIP", "AGE", "DATE",
    "PHONE", "EMAIL", "MEDICALRECORD", "IDNUM",
]

HEADER_TEMPLATES = [
    "Record date: {DATE}",
    "Date of service: {DATE}",
    "{HOSPITAL}",
    "MRN: {MEDICALRECORD}",
]

SENTENCE_TEMPLATES = [
    "{PATIENT} is a {AGE} year old {PROFESSION} admitted to {HOSPITAL} on {DATE}.",
    "Mr. {PATIENT} is a {AGE}yo man seen today for diabetes follow up.",
    "Ms. {PATIENT} presents for follow up of type 2 diabetes.",
    "Mrs. {PATIENT} was seen by Dr. {DOCTOR} on {DATE}.",
    "Patient {PATIENT} was seen in clinic by Dr. {DOCTOR}.",
    "She works as a {PROFESSION} in {CITY}, {STATE}.",
    "He is a retired {PROFESSION} from {CITY}.",
    "He lives at {STREET}, {CITY}, {STATE} {ZIP}.",
    "Home address is {STREET} in {CITY}.",
    "Please call {PHONE} with any questions.",
    "Contact Dr. {DOCTOR} at {PHONE} or {EMAIL} with concerns.",
    "Her email is {EMAIL} and her phone is {PHONE}.",
    "Medical record number {MEDICALRECORD} was verified.",
    "SSN {IDNUM} is on file.",
    "Insurance ID {IDNUM} was confirmed at registration.",
    "Transferred from {HOSPITAL} to {HOSPITAL} on {DATE}.",
    "Follow up with Dr. {DOCTOR} in {CITY} on {DATE}.",
    "Discharged on {DATE} in stable condition.",
    "Last visit was on {DATE}.",
    "The patient is {AGE} years old.",
    "Her daughter, a {PROFESSION}, lives in {CITY}.",
    "Labs were drawn at {HOSPITAL} on {DATE}.",
    "Signed by Dr. {DOCTOR}, {DATE}.",
    "Fax results to {PHONE} attention Dr. {DOCTOR}.",
    "{PATIENT} reports good adherence to insulin.",
    "{PATIENT} came with her husband {PATIENT} today.",
    "Case discussed with {DOCTOR} from endocrinology.",
    "Weight 82 kg, down 3 kg since {DATE}.",
    "He has worked as a {PROFESSION} for 30 years.",
    "Seen at {HOSPITAL} by {DOCTOR} in {CITY}.",
]

FILLER_SENTENCES = [
    "Blood sugar has been well controlled.",
    "Hemoglobin A1c was 7.2 percent.",
    "Continue metformin 500 mg twice daily.",
    "Blood pressure 130/85, heart rate 72.",
    "No chest pain or shortness of breath.",
    "Return to clinic in 3 months.",
    "Denies fever, chills, or weight loss.",
    "Foot exam shows intact sensation.",
    "Insulin glargine 20 units at bedtime.",
    "Creatinine stable at 1.1 mg/dL.",
    "Counseled on diet and exercise.",
    "Eyes: no retinopathy on last exam.",
    "Glucose 145 this morning.",
    "He walks 30 minutes 5 days a week.",
    "Lisinopril 10 mg daily, aspirin 81 mg.",
    "Follow up in 2 weeks with repeat labs.",
]

_SLOT = re.compile(r"\{([A-Z]+)\}")


@dataclass
class GeneratorConfig:
    header_templates: list[str] = field(default_factory=lambda: list(HEADER_TEMPLATES))
    sentence_templates: list[str] = field(default_factory=lambda: list(SENTENCE_TEMPLATES))
    filler_sentences: list[str] = field(default_factory=lambda: list(FILLER_SENTENCES))
    min_sentences: int = 5
    max_sentences: int = 9
    filler_rate: float = 0.3


class _Sampler:
    def __init__(self, rng: SeededRng):
        self.rng = rng

    def pick(self, seq):
        return seq[int(self.rng.integers(0, len(seq)))]

    def digits(self, n: int) -> str:
        return "".join(str(int(d)) for d in self.rng.integers(0, 10, size=n))

    def value(self, phi_type: str) -> str:
        return getattr(self, "_" + phi_type.lower())()

    def _coined(self) -> str:
        parts = [self.pick(NAME_ONSETS) + self.pick(NAME_VOWELS) for _ in range(int(self.rng.integers(1, 3)))]
        return ("".join(parts) + self.pick(NAME_CODAS)).capitalize()

    def _name(self):
        first = self._coined() if self.rng.random() < 0.4 else self.pick(FIRST_NAMES)
        last = self._coined() if self.rng.random() < 0.4 else self.pick(LAST_NAMES)
        return self.pick([f"{first} {last}", last, f"{first} {last}"])

    _patient = _name
    _doctor = _name

    def _profession(self):
        return self.pick(PROFESSIONS)

    def _hospital(self):
        return self.pick(HOSPITALS)

    def _city(self):
        return self.pick(CITIES)

    def _state(self):
        return self.pick(STATES)

    def _street(self):
        return f"{int(self.rng.integers(1, 999))} {self.pick(STREET_NAMES)} {self.pick(STREET_SUFFIXES)}"

    def _zip(self):
        return "0" + self.digits(4)

    def _age(self):
        return str(int(self.rng.integers(18, 99)))

    def _date(self):
        y = int(self.rng.integers(1995, 2021))
        mo = int(self.rng.integers(1, 13))
        d = int(self.rng.integers(1, 29))
        form = int(self.rng.integers(0, 5))
        if form == 0:
            return f"{mo:02d}/{d:02d}/{y}"
        if form == 1:
            return f"{mo}/{d}/{y % 100:02d}"
        if form == 2:
            return f"{MONTHS[mo - 1]} {d}, {y}"
        if form == 3:
            return f"{y}-{mo:02d}-{d:02d}"
        return f"{mo}/{d}"

    def _phone(self):
        a, b, c = self.digits(3), self.digits(3), self.digits(4)
        return self.pick([f"({a}) {b}-{c}", f"{a}-{b}-{c}"])

    def _email(self):
        first, last = self.pick(FIRST_NAMES), self.pick(LAST_NAMES)
        return f"{first[0].lower()}{last.lower()}@{self.pick(EMAIL_DOMAINS)}"

    def _medicalrecord(self):
        return self.pick([self.digits(7), self.digits(8)])

    def _idnum(self):
        return self.pick([f"{self.digits(3)}-{self.digits(2)}-{self.digits(4)}", self.digits(9)])


def _fill(template: str, sampler: _Sampler, base: int) -> tuple[str, list[EntityAnnotation]]:
    parts = []
    anns = []
    pos = 0
    length = 0
    for m in _SLOT.finditer(template):
        lit = template[pos : m.start()]
        parts.append(lit)
        length += len(lit)
        val = sampler.value(m.group(1))
        anns.append(EntityAnnotation(base + length, base + length + len(val), m.group(1)))
        parts.append(val)
        length += len(val)
        pos = m.end()
    parts.append(template[pos:])
    return "".join(parts), anns


def generate_document(rng: SeededRng, doc_id: str, config: GeneratorConfig) -> AnnotatedDocument:
    sampler = _Sampler(rng)
    pieces: list[str] = []
    anns: list[EntityAnnotation] = []
    offset = 0

    def emit(template: str, sep: str) -> None:
        nonlocal offset
        text, found = _fill(template, sampler, offset)
        pieces.append(text + sep)
        anns.extend(found)
        offset += len(text) + len(sep)

    emit(sampler.pick(config.header_templates), "\n")
    n = int(rng.integers(config.min_sentences, config.max_sentences + 1))
    for i in range(n):
        if rng.random() < config.filler_rate:
            tpl = sampler.pick(config.filler_sentences)
        else:
            tpl = sampler.pick(config.sentence_templates)
        sep = "\n" if rng.random() < 0.3 or i == n - 1 else " "
        emit(tpl, sep)
    return AnnotatedDocument(RawDocument(doc_id, "".join(pieces)), anns)


def generate_corpus(seed: int, n_docs: int, config: GeneratorConfig | None = None) -> list[AnnotatedDocument]:
    if n_docs < 1:
        raise ValueError("n_docs must be >= 1")
    config = config or GeneratorConfig()
    rng = SeededRng(seed)
    width = max(5, len(str(n_docs)))
    return [generate_document(rng, f"doc-{i:0{width}d}", config) for i in range(n_docs)]
