import json
import os
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Sequence, Tuple

from src.constants import EOS_TOKEN, GRAPH_TOKEN, IMAGE_TOKEN, NO, UNK_TOKEN, YES
from src.exception import InvariantViolationError
from src.utils.main_utils import require_file

RESERVED_TOKENS = (UNK_TOKEN, EOS_TOKEN, IMAGE_TOKEN, GRAPH_TOKEN)


def tokenize(text: str) -> List[str]:
    """Whitespace word splitting; no other normalization."""
    return text.split()


@dataclass(frozen=True)
class Vocabulary:
    tokens: Tuple[str, ...]
    index: Dict[str, int] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if len(set(self.tokens)) != len(self.tokens):
            raise InvariantViolationError("vocabulary tokens must be unique")
        if self.tokens[:len(RESERVED_TOKENS)] != RESERVED_TOKENS:
            raise InvariantViolationError(f"vocabulary must start with {RESERVED_TOKENS}")
        object.__setattr__(self, "index", {t: i for i, t in enumerate(self.tokens)})

    @classmethod
    def build(cls, texts: Iterable[str], label_names: Sequence[str] = ()) -> "Vocabulary":
        """Reserved tokens, Yes/No, label words, then corpus words in first-seen order."""
        ordered: Dict[str, None] = dict.fromkeys(RESERVED_TOKENS)
        ordered.update(dict.fromkeys([YES, NO]))
        for name in label_names:
            ordered.update(dict.fromkeys(tokenize(name)))
        for text in texts:
            ordered.update(dict.fromkeys(tokenize(text)))
        return cls(tokens=tuple(ordered))

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self.index

    @property
    def unk_id(self) -> int:
        return self.index[UNK_TOKEN]

    @property
    def eos_id(self) -> int:
        return self.index[EOS_TOKEN]

    def encode(self, words: Sequence[str]) -> List[int]:
        unk = self.unk_id
        return [self.index.get(w, unk) for w in words]

    def decode(self, ids: Sequence[int]) -> List[str]:
        return [self.tokens[i] for i in ids]

    def save(self, file_path: str) -> None:
        os.makedirs(os.path.dirname(file_path) or ".", exist_ok=True)
        with open(file_path, "w", encoding="utf-8") as fh:
            json.dump({"tokens": list(self.tokens)}, fh, ensure_ascii=False, indent=0)

    @classmethod
    def load(cls, file_path: str) -> "Vocabulary":
        with open(require_file(file_path, "vocabulary"), "r", encoding="utf-8") as fh:
            return cls(tokens=tuple(json.load(fh)["tokens"]))
