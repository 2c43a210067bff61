from speaker_adaptive.enums import ExpressiveStyle

DEFAULT_MODALITY_DIMS: dict[str, int] = {"audio": 12, "visual": 12}

# probability that a modality carries signal, per style; unlisted modalities use
# DEFAULT_RELIABILITY
STYLE_RELIABILITY: dict[ExpressiveStyle, dict[str, float]] = {
    ExpressiveStyle.BALANCED: {"audio": 0.8, "visual": 0.8},
    ExpressiveStyle.FACIAL: {"audio": 0.2, "visual": 0.9},
    ExpressiveStyle.VOCAL: {"audio": 0.9, "visual": 0.2},
}
DEFAULT_RELIABILITY = 0.8
DEFAULT_STYLE_CYCLE: list[ExpressiveStyle] = [
    ExpressiveStyle.BALANCED,
    ExpressiveStyle.FACIAL,
    ExpressiveStyle.VOCAL,
]

LONG_TAIL_RATIO = 0.6

DEFAULT_SPEAKERS_PER_DIALOGUE = 2
# prior mass moved onto each speaker's signature emotion in heterogeneous corpora
DEFAULT_SIGNATURE_SHARE = 0.4

DEFAULT_LAMBDA = 0.5
DEFAULT_LAMBDA_GRID: list[float] = [0.0, 0.1, 0.2, 0.5, 1.0, 2.0]

DEFAULT_SPLIT_FRACTIONS: tuple[float, float, float] = (0.7, 0.15, 0.15)
MAX_SPLIT_ATTEMPTS = 100

CHECKPOINT_VERSION = "san-ckpt/2"
REPORT_VERSION = "1"
