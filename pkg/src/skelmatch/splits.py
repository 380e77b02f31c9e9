"""One-shot dataset splits: novel (test) classes and Protocol-2 exemplars."""

import json
from dataclasses import dataclass, field

from .errors import ConfigError
from .skeleton import label_from_id

NTU120_TEST = tuple(range(1, 121, 6))
NTU120_EXEMPLARS = (
    "S001C003P008R001A001", "S001C003P008R001A007", "S001C003P008R001A013", "S001C003P008R001A019",
    "S001C003P008R001A025", "S001C003P008R001A031", "S001C003P008R001A037", "S001C003P008R001A043",
    "S001C003P008R001A049", "S001C003P008R001A055", "S018C003P008R001A061", "S018C003P008R001A067",
    "S018C003P008R001A073", "S018C003P008R001A079", "S018C003P008R001A085", "S018C003P008R001A091",
    "S018C003P008R001A097", "S018C003P008R001A103", "S018C003P008R001A109", "S018C003P008R001A115",
)
NTU60_TEST = tuple(a for a in NTU120_TEST if a <= 60)
NTU60_EXEMPLARS = tuple(e for e in NTU120_EXEMPLARS if label_from_id(e) <= 60)
PKU_TEST = tuple(range(1, 47, 5))
# verbatim, including the missing underscore in the class-26 id
PKU_EXEMPLARS = (
    "0003-L_A_1", "0003-L_A_6", "0002-L_A_11", "0005-L_A_16", "0005-L_A_21",
    "0005-L_A26", "0002-L_A_31", "0003-L_A_36", "0002-L_A_41", "0003-L_A_46",
)


@dataclass(frozen=True)
class SplitDefinition:
    name: str
    train_classes: tuple
    test_classes: tuple
    exemplar_ids: tuple = None
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "train_classes", tuple(sorted(int(a) for a in self.train_classes)))
        object.__setattr__(self, "test_classes", tuple(sorted(int(a) for a in self.test_classes)))
        if self.exemplar_ids is not None:
            object.__setattr__(self, "exemplar_ids", tuple(self.exemplar_ids))
        overlap = set(self.train_classes) & set(self.test_classes)
        if overlap:
            raise ConfigError(f"split {self.name!r}: classes {sorted(overlap)} are both train and test", "split")
        if self.exemplar_ids:
            labels = [label_from_id(e) for e in self.exemplar_ids]
            if None in labels:
                raise ConfigError(f"split {self.name!r}: cannot read a class from exemplar id", "split")
            if len(set(labels)) != len(labels) or not set(labels) <= set(self.test_classes):
                raise ConfigError(
                    f"split {self.name!r}: exemplars must cover distinct test classes", "split"
                )

    def exemplar_class(self, exemplar_id):
        return label_from_id(exemplar_id)

    def to_dict(self):
        return {
            "name": self.name,
            "train_classes": list(self.train_classes),
            "test_classes": list(self.test_classes),
            "exemplar_ids": None if self.exemplar_ids is None else list(self.exemplar_ids),
            "metadata": dict(self.metadata),
        }

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_dict(cls, doc):
        try:
            return cls(
                doc["name"], doc.get("train_classes", ()), doc["test_classes"],
                doc.get("exemplar_ids"), doc.get("metadata", {}),
            )
        except KeyError as exc:
            raise ConfigError(f"split definition lacks field {exc}", "split") from None


def _split(name, n_classes, test, exemplars):
    return SplitDefinition(
        name,
        tuple(a for a in range(1, n_classes + 1) if a not in test),
        test,
        exemplars,
        {"n_classes": n_classes, "validation": "cross-subject subdivision of training classes"},
    )


def builtin_splits():
    return [
        _split("ntu120", 120, NTU120_TEST, NTU120_EXEMPLARS),
        _split("ntu60", 60, NTU60_TEST, NTU60_EXEMPLARS),
        _split("pkummd", 51, PKU_TEST, PKU_EXEMPLARS),
    ]


def get_split(name):
    for s in builtin_splits():
        if s.name == name:
            return s
    known = ", ".join(s.name for s in builtin_splits())
    raise KeyError(f"unknown split {name!r}; known splits: {known}")


def load_split(name_or_path):
    """A built-in split by name, or a split JSON file."""
    if name_or_path.endswith(".json"):
        with open(name_or_path) as f:
            return SplitDefinition.from_dict(json.load(f))
    return get_split(name_or_path)
