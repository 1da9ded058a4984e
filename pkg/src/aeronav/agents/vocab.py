"""Closed vocabulary and dialog tokenization.

Ids 0, 1, 2 are reserved in every vocabulary: the instruction marker, the
question marker, and the out-of-vocabulary id.  The file format is one token
per line with the line number as the id, so the reserved entries are always
the first three lines.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..dataset import DialogRound, phrase_bank_words

INS_TOKEN = "[INS]"
QUE_TOKEN = "[QUE]"
OOV_TOKEN = "<oov>"
INS_ID = 0
QUE_ID = 1
OOV_ID = 2
_RESERVED = (INS_TOKEN, QUE_TOKEN, OOV_TOKEN)


class Vocabulary:
    """Immutable word-to-id table with fixed reserved ids."""

    def __init__(self, words):
        cleaned = sorted({w for w in words if w and w not in _RESERVED})
        self._tokens: tuple[str, ...] = _RESERVED + tuple(cleaned)
        self._ids = {tok: i for i, tok in enumerate(self._tokens)}

    @classmethod
    def default(cls) -> "Vocabulary":
        """Vocabulary covering the generator's entire phrase bank."""
        return cls(phrase_bank_words())

    @property
    def tokens(self) -> tuple[str, ...]:
        return self._tokens

    def __len__(self) -> int:
        return len(self._tokens)

    def __eq__(self, other) -> bool:
        return isinstance(other, Vocabulary) and self._tokens == other._tokens

    def id_of(self, word: str) -> int:
        return self._ids.get(word, OOV_ID)

    def encode_text(self, text: str) -> list[int]:
        """Lowercase whitespace tokenization through the table."""
        return [self.id_of(w) for w in text.lower().split()]

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for tok in self._tokens:
                fh.write(tok + "\n")

    @classmethod
    def load(cls, path) -> "Vocabulary":
        with open(path, "r", encoding="utf-8") as fh:
            tokens = [line.rstrip("\n") for line in fh]
        while tokens and tokens[-1] == "":
            tokens.pop()
        if tuple(tokens[:3]) != _RESERVED:
            raise ValueError(
                f"vocabulary file must start with {_RESERVED}, got {tokens[:3]}")
        if len(set(tokens)) != len(tokens):
            raise ValueError("vocabulary file contains duplicate tokens")
        vocab = cls(tokens[3:])
        if vocab.tokens != tuple(tokens):
            raise ValueError("vocabulary file tokens are not in sorted order")
        return vocab


@dataclass(frozen=True)
class TokenSequence:
    """Token ids for a dialog plus the marker positions."""

    tokens: tuple[int, ...]
    ins_positions: tuple[int, ...]
    que_positions: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(int(t) for t in self.tokens))
        object.__setattr__(self, "ins_positions", tuple(self.ins_positions))
        object.__setattr__(self, "que_positions", tuple(self.que_positions))
        for pos in self.ins_positions:
            if not (0 <= pos < len(self.tokens)) or self.tokens[pos] != INS_ID:
                raise ValueError(f"position {pos} does not hold the {INS_TOKEN} id")
        for pos in self.que_positions:
            if not (0 <= pos < len(self.tokens)) or self.tokens[pos] != QUE_ID:
                raise ValueError(f"position {pos} does not hold the {QUE_TOKEN} id")
        if len(self.ins_positions) != sum(1 for t in self.tokens if t == INS_ID):
            raise ValueError("ins_positions does not list every [INS] token")
        if len(self.que_positions) != sum(1 for t in self.tokens if t == QUE_ID):
            raise ValueError("que_positions does not list every [QUE] token")

    def __len__(self) -> int:
        return len(self.tokens)


def tokenize_dialog(dialog, vocab: Vocabulary) -> TokenSequence:
    """Flatten dialog rounds to ids, tagging each question and instruction.

    Questions precede their round's instruction; rounds without a question
    contribute only the tagged instruction.
    """
    tokens: list[int] = []
    ins_pos: list[int] = []
    que_pos: list[int] = []
    for rnd in dialog:
        if not isinstance(rnd, DialogRound):
            raise TypeError(f"expected DialogRound, got {type(rnd).__name__}")
        if rnd.question:
            que_pos.append(len(tokens))
            tokens.append(QUE_ID)
            tokens.extend(vocab.encode_text(rnd.question))
        ins_pos.append(len(tokens))
        tokens.append(INS_ID)
        tokens.extend(vocab.encode_text(rnd.instruction))
    return TokenSequence(tokens=tuple(tokens), ins_positions=tuple(ins_pos),
                         que_positions=tuple(que_pos))
