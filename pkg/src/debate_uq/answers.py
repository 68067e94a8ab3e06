"""Final-answer extraction and canonicalization.

Responses carry their conclusion inside ``\\boxed{...}``. The helpers here
pull out the last balanced box, reduce its contents to a canonical form
(exact rationals where possible, cleaned symbolic text otherwise), and
decide equivalence between two canonical answers.

The normalization pipeline applies, in order:

1. strip surrounding whitespace and a stray outer ``\\boxed{...}`` wrapper,
2. drop ``\\left``/``\\right`` sizing tokens and an outer ``\\text{...}``,
3. strip trailing punctuation (``. , ; : ! ?``),
4. parse ``\\frac{a}{b}``, ``a/b``, plain integers, and decimal literals
   into exact rationals (decimals via their power-of-ten denominator),
5. otherwise collapse internal whitespace and keep the symbolic string.

The rule list is deliberately closed: no CAS, no unit handling, no
locale-aware number parsing. Symbolic equivalence is byte equality of the
normalized string, so ``x+1`` and ``1+x`` stay distinct on purpose.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from .errors import AnswerError

#: Reserved support key for responses without a usable final answer.
UNPARSEABLE = "⊥"

FORM_RATIONAL = "rational"
FORM_DECIMAL = "decimal"
FORM_SYMBOLIC = "symbolic-string"

_BOX_MARKER = "\\boxed{"
_INT_RE = re.compile(r"^[+-]?\d+$")
_DECIMAL_RE = re.compile(r"^([+-]?)(\d*)\.(\d+)$|^([+-]?)(\d+)\.(\d*)$")
_RATIO_RE = re.compile(r"^([+-]?\d+)\s*/\s*([+-]?\d+)$")
_FRAC_RE = re.compile(r"^([+-]?)\\[dt]?frac\{([+-]?\d+)\}\{([+-]?\d+)\}$")


@dataclass(frozen=True)
class CanonicalAnswer:
    """Normalized answer value.

    Attributes:
        normalized: canonical rendering; for numeric answers this is the
            reduced fraction string (``"3/8"``, ``"13535"``) so equivalent
            numerals share one support key.
        numeric: exact rational value when the text parsed as a number.
        form: which parse path produced the value. Excluded from equality
            so that re-normalizing a rendered answer is a fixed point.
    """

    normalized: str
    numeric: Optional[Fraction] = None
    form: str = field(default=FORM_SYMBOLIC, compare=False)

    def __post_init__(self) -> None:
        if not self.normalized:
            raise AnswerError("empty answer")
        if self.numeric is not None and Fraction(self.normalized) != self.numeric:
            raise AnswerError(
                f"normalized form {self.normalized!r} does not re-render to {self.numeric}"
            )


def extract_final_answer(text: str) -> Optional[str]:
    """Return the contents of the last balanced ``\\boxed{...}`` in *text*.

    Nested braces are respected, so ``\\boxed{\\frac{3}{8}}`` yields
    ``\\frac{3}{8}``. Returns None when no balanced box exists.
    """
    found: Optional[str] = None
    start = text.find(_BOX_MARKER)
    while start != -1:
        body_start = start + len(_BOX_MARKER)
        depth = 1
        pos = body_start
        while pos < len(text) and depth > 0:
            ch = text[pos]
            if ch == "{":
                depth += 1
            elif ch == "}":
                depth -= 1
            pos += 1
        if depth == 0:
            found = text[body_start : pos - 1]
        start = text.find(_BOX_MARKER, start + 1)
    return found


def _strip_outer_wrapper(s: str, marker: str) -> str:
    """Remove ``marker{...}`` when it wraps the entire string."""
    if not s.startswith(marker + "{") or not s.endswith("}"):
        return s
    depth = 1
    for pos in range(len(marker) + 1, len(s)):
        ch = s[pos]
        if ch == "{":
            depth += 1
        elif ch == "}":
            depth -= 1
            if depth == 0:
                # The wrapper only counts if it closes at the very end.
                return s[len(marker) + 1 : -1] if pos == len(s) - 1 else s
    return s


def _parse_rational(s: str) -> Optional[tuple[Fraction, str]]:
    m = _FRAC_RE.match(s)
    if m:
        sign, num, den = m.groups()
        try:
            value = Fraction(int(num), int(den))
        except ZeroDivisionError:
            return None
        if sign == "-":
            value = -value
        return value, FORM_RATIONAL
    m = _RATIO_RE.match(s)
    if m:
        try:
            return Fraction(int(m.group(1)), int(m.group(2))), FORM_RATIONAL
        except ZeroDivisionError:
            return None
    if _INT_RE.match(s):
        return Fraction(int(s)), FORM_RATIONAL
    m = _DECIMAL_RE.match(s)
    if m:
        if m.group(3) is not None:
            sign, whole, frac_digits = m.group(1), m.group(2) or "0", m.group(3)
        else:
            sign, whole, frac_digits = m.group(4), m.group(5), m.group(6) or ""
        digits = whole + frac_digits
        value = Fraction(int(digits), 10 ** len(frac_digits))
        if sign == "-":
            value = -value
        return value, FORM_DECIMAL
    return None


def normalize_answer(raw: str) -> CanonicalAnswer:
    """Reduce raw answer text to its canonical form.

    Raises:
        AnswerError: when nothing remains after cleanup ("empty answer").
    """
    if not raw:
        raise AnswerError("empty answer")
    s = raw.strip()
    for _ in range(4):  # wrappers can nest a little; a short fixpoint loop
        previous = s
        s = _strip_outer_wrapper(s, "\\boxed")
        s = s.replace("\\left", "").replace("\\right", "")
        s = _strip_outer_wrapper(s.strip(), "\\text")
        s = s.strip().rstrip(".,;:!?").strip()
        if s == previous:
            break
    if not s:
        raise AnswerError("empty answer")
    parsed = _parse_rational(s)
    if parsed is not None:
        value, form = parsed
        return CanonicalAnswer(normalized=str(value), numeric=value, form=form)
    return CanonicalAnswer(normalized=" ".join(s.split()), numeric=None, form=FORM_SYMBOLIC)


def answers_equivalent(a: CanonicalAnswer, b: CanonicalAnswer) -> bool:
    """True when both are equal rationals or byte-equal symbolic strings."""
    if a.numeric is not None and b.numeric is not None:
        return a.numeric == b.numeric
    if a.numeric is None and b.numeric is None:
        return a.normalized == b.normalized
    return False


def correctness(answer: Optional[CanonicalAnswer], ground_truth: CanonicalAnswer) -> int:
    """Binary grade. Missing or inequivalent answers score 0; never raises."""
    if answer is None:
        return 0
    return 1 if answers_equivalent(answer, ground_truth) else 0


def canonical_key(text: str) -> str:
    """Map raw response text to its support key.

    Extracts the final boxed answer and normalizes it. Any failure along
    the way collapses to the reserved key ``UNPARSEABLE``.
    """
    raw = extract_final_answer(text)
    if raw is None:
        return UNPARSEABLE
    try:
        return normalize_answer(raw).normalized
    except AnswerError:
        return UNPARSEABLE
