from enum import StrEnum


class Ablation(StrEnum):
    FULL = "full"
    NO_FILM = "no_film"
    NO_GATE = "no_gate"
    NO_AUX = "no_aux"


class PriorShape(StrEnum):
    UNIFORM = "uniform"
    LONG_TAIL = "long_tail"


class ExpressiveStyle(StrEnum):
    BALANCED = "balanced"
    FACIAL = "facial"
    VOCAL = "vocal"


class Split(StrEnum):
    TRAIN = "train"
    VALIDATION = "validation"
    TEST = "test"
