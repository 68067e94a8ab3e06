"""Datasets, transcript persistence, metrics export, training batches.

All files are line-delimited JSON or CSV with a fixed field order, no
timestamps, and repr-exact floats, so identical runs produce identical
bytes. Transcript files open with a schema-versioned header record; a
header-only file is a valid empty transcript.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional, Sequence

from .errors import StorageError, ValidationError
from .model import (
    AgentSpec,
    DebateConfig,
    Problem,
    Response,
    SamplingParams,
    Transcript,
)
from .rewards import AdvantageRecord
from .uncertainty import UncertaintyReport, flip_transitions, nats_to_bits

SCHEMA_VERSION = 1

_DECOMP_TOL = 1e-12

MEAN_ROW_ID = "__mean__"
TOTAL_ROW_ID = "__total__"


# ---------------------------------------------------------------------------
# Datasets


def load_dataset(path: "str | os.PathLike[str]") -> tuple[Problem, ...]:
    """Read a JSONL dataset of {id, question, answer} records.

    Answers are canonicalized at load so every Problem carries the
    canonical ground-truth key. Errors cite the 1-based line number.
    """
    from .answers import normalize_answer

    problems: list[Problem] = []
    seen: set[str] = set()
    with open(path, "rb") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise StorageError(f"line {lineno}: malformed JSON ({exc.msg})") from exc
            if not isinstance(record, dict):
                raise StorageError(f"line {lineno}: record must be an object")
            for key in ("id", "question", "answer"):
                if key not in record:
                    raise StorageError(f"line {lineno}: missing field {key!r}")
            pid = str(record["id"])
            if pid in seen:
                raise StorageError(f"line {lineno}: duplicate id {pid!r}")
            seen.add(pid)
            try:
                truth = normalize_answer(str(record["answer"])).normalized
                problems.append(
                    Problem(
                        problem_id=pid,
                        question=str(record["question"]),
                        ground_truth=truth,
                    )
                )
            except (ValidationError, ValueError) as exc:
                raise StorageError(f"line {lineno}: {exc}") from exc
    if not problems:
        raise StorageError("empty dataset")
    return tuple(problems)


# ---------------------------------------------------------------------------
# Transcripts


def _spec_to_dict(spec: AgentSpec) -> dict:
    return {
        "agent_id": spec.agent_id,
        "kind": spec.kind,
        "sampling": {
            "temperature": spec.sampling.temperature,
            "top_p": spec.sampling.top_p,
            "max_tokens": spec.sampling.max_tokens,
        },
        "model": spec.model,
        "params": dict(spec.params),
    }


def _spec_from_dict(d: dict) -> AgentSpec:
    return AgentSpec(
        agent_id=d["agent_id"],
        kind=d["kind"],
        sampling=SamplingParams(**d["sampling"]),
        model=d.get("model"),
        params=d.get("params", {}),
    )


def _response_to_dict(r: Response, kind: str) -> dict:
    return {
        "kind": kind,
        "agent_id": r.agent_id,
        "turn": r.turn,
        "trajectory_id": r.trajectory_id,
        "text": r.text,
        "token_logprobs": list(r.token_logprobs) if r.token_logprobs is not None else None,
        "extracted_answer": r.extracted_answer,
        "correct": r.correct,
    }


def _response_from_dict(d: dict) -> Response:
    lps = d.get("token_logprobs")
    return Response(
        agent_id=d["agent_id"],
        turn=d["turn"],
        trajectory_id=d["trajectory_id"],
        text=d["text"],
        token_logprobs=tuple(lps) if lps is not None else None,
        extracted_answer=d.get("extracted_answer"),
        correct=d.get("correct"),
    )


def _report_to_dict(rep: UncertaintyReport) -> dict:
    return {
        "kind": "report",
        "turn": rep.turn,
        "total": rep.total,
        "epistemic": rep.epistemic,
        "aleatoric": rep.aleatoric,
        "per_agent_entropy": list(rep.per_agent_entropy),
    }


def transcript_records(transcript: Transcript) -> list[dict]:
    header = {
        "kind": "header",
        "schema_version": SCHEMA_VERSION,
        "problem_id": transcript.problem_id,
        "question": transcript.question,
        "ground_truth": transcript.ground_truth,
        "config": asdict(transcript.config),
        "agents": [_spec_to_dict(s) for s in transcript.agents],
    }
    records = [header]
    records.extend(_response_to_dict(r, "response") for r in transcript.responses)
    records.extend(_response_to_dict(r, "probe") for r in transcript.probes)
    records.extend(_report_to_dict(rep) for rep in transcript.reports)
    return records


def save_transcript(transcript: Transcript, path: "str | os.PathLike[str]") -> None:
    payload = "".join(
        json.dumps(record, ensure_ascii=False, separators=(",", ":")) + "\n"
        for record in transcript_records(transcript)
    )
    Path(path).write_text(payload, encoding="utf-8")


def load_transcript(path: "str | os.PathLike[str]") -> Transcript:
    """Exact inverse of save_transcript.

    Malformed or truncated lines raise citing the byte offset where the
    bad record starts.
    """
    header: Optional[dict] = None
    responses: list[Response] = []
    probes: list[Response] = []
    reports: list[UncertaintyReport] = []
    offset = 0
    with open(path, "rb") as fh:
        for raw in fh:
            line = raw.strip()
            if line:
                try:
                    record = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise StorageError(
                        f"byte offset {offset}: malformed or truncated record ({exc.msg})"
                    ) from exc
                kind = record.get("kind")
                if kind == "header":
                    version = record.get("schema_version")
                    if version != SCHEMA_VERSION:
                        raise StorageError(
                            f"unsupported schema version {version!r} "
                            f"(expected {SCHEMA_VERSION})"
                        )
                    header = record
                elif header is None:
                    raise StorageError("transcript must start with a header record")
                elif kind == "response":
                    responses.append(_response_from_dict(record))
                elif kind == "probe":
                    probes.append(_response_from_dict(record))
                elif kind == "report":
                    reports.append(
                        UncertaintyReport(
                            turn=record["turn"],
                            total=record["total"],
                            epistemic=record["epistemic"],
                            aleatoric=record["aleatoric"],
                            per_agent_entropy=tuple(record["per_agent_entropy"]),
                        )
                    )
                else:
                    raise StorageError(
                        f"byte offset {offset}: unknown record kind {kind!r}"
                    )
            offset += len(raw)
    if header is None:
        raise StorageError("transcript has no header record")
    return Transcript(
        problem_id=header["problem_id"],
        config=DebateConfig(**header["config"]),
        question=header.get("question", ""),
        ground_truth=header.get("ground_truth", ""),
        agents=tuple(_spec_from_dict(d) for d in header["agents"]),
        responses=tuple(responses),
        probes=tuple(probes),
        reports=tuple(reports),
    )


# ---------------------------------------------------------------------------
# Metrics export


@dataclass
class MetricsPaths:
    turn_csv: Path
    turn_jsonl: Path
    flip_csv: Path
    flip_jsonl: Path

    def all(self) -> list[Path]:
        return [self.turn_csv, self.turn_jsonl, self.flip_csv, self.flip_jsonl]


def _turn_rows(transcript: Transcript, bits: bool) -> list[dict]:
    n = transcript.config.n_agents
    scale = (lambda x: nats_to_bits(x)) if bits else (lambda x: x)
    use_probes = bool(transcript.probes)
    rows = []
    for rep in transcript.reports:
        if abs(rep.total - rep.epistemic - rep.aleatoric) > _DECOMP_TOL:
            raise StorageError(
                f"decomposition violated at problem {transcript.problem_id} "
                f"turn {rep.turn}"
            )
        population = transcript.at_turn(rep.turn, probes=use_probes)
        row: dict = {
            "problem_id": transcript.problem_id,
            "turn": rep.turn,
            "total": scale(rep.total),
            "epistemic": scale(rep.epistemic),
            "aleatoric": scale(rep.aleatoric),
        }
        for i in range(n):
            mine = [r for r in population if r.agent_id == i]
            graded = [r.correct for r in mine if r.correct is not None]
            row[f"accuracy_agent{i}"] = (
                math.fsum(graded) / len(graded) if graded else 0.0
            )
        for i, h in enumerate(rep.per_agent_entropy):
            row[f"entropy_agent{i}"] = scale(h)
        rows.append(row)
    return rows


def _flip_rows(transcript: Transcript) -> list[dict]:
    """Flip accounting between consecutive turns, aligned by (trajectory, agent)."""
    rows = []
    graded: dict[tuple[int, int, int], int] = {}
    turns = sorted({r.turn for r in transcript.responses})
    for r in transcript.responses:
        if r.correct is not None:
            graded[(r.trajectory_id, r.agent_id, r.turn)] = r.correct
    for turn_from, turn_to in zip(turns, turns[1:]):
        before = []
        after = []
        cells = sorted(
            {(k, i) for (k, i, t) in graded if t == turn_from}
            & {(k, i) for (k, i, t) in graded if t == turn_to}
        )
        for k, i in cells:
            before.append(graded[(k, i, turn_from)])
            after.append(graded[(k, i, turn_to)])
        if not before:
            continue
        stats = flip_transitions(before, after)
        rows.append(
            {
                "problem_id": transcript.problem_id,
                "turn_from": turn_from,
                "turn_to": turn_to,
                "c2c": stats.c2c,
                "c2w": stats.c2w,
                "w2c": stats.w2c,
                "w2w": stats.w2w,
                "flip_ratio": stats.flip_ratio,
            }
        )
    return rows


def _mean_rows(rows: list[dict], key_fields: tuple[str, ...], label: str) -> list[dict]:
    """Aggregate numeric columns over problems for each key tuple."""
    by_key: dict[tuple, list[dict]] = {}
    for row in rows:
        by_key.setdefault(tuple(row[f] for f in key_fields), []).append(row)
    out = []
    for key in sorted(by_key):
        group = by_key[key]
        agg: dict = {"problem_id": label}
        agg.update(dict(zip(key_fields, key)))
        numeric = [
            f
            for f in group[0]
            if f not in ("problem_id", *key_fields)
            and isinstance(group[0][f], (int, float))
        ]
        for f in numeric:
            agg[f] = math.fsum(row[f] for row in group) / len(group)
        out.append(agg)
    return out


def _total_flip_rows(rows: list[dict]) -> list[dict]:
    by_key: dict[tuple, list[dict]] = {}
    for row in rows:
        by_key.setdefault((row["turn_from"], row["turn_to"]), []).append(row)
    out = []
    for key in sorted(by_key):
        group = by_key[key]
        counts = {f: sum(row[f] for row in group) for f in ("c2c", "c2w", "w2c", "w2w")}
        total = sum(counts.values())
        out.append(
            {
                "problem_id": TOTAL_ROW_ID,
                "turn_from": key[0],
                "turn_to": key[1],
                **counts,
                "flip_ratio": (counts["c2w"] + counts["w2c"]) / total if total else 0.0,
            }
        )
    return out


def _write_csv(path: Path, rows: list[dict], columns: list[str]) -> None:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({c: _cell(row.get(c)) for c in columns})
    path.write_text(buf.getvalue(), encoding="utf-8")


def _cell(value):
    if isinstance(value, float):
        return repr(value)
    return value


def _write_jsonl(path: Path, rows: list[dict]) -> None:
    payload = "".join(
        json.dumps(row, ensure_ascii=False, separators=(",", ":")) + "\n" for row in rows
    )
    path.write_text(payload, encoding="utf-8")


def export_metrics(
    transcripts: Sequence[Transcript],
    out_dir: "str | os.PathLike[str]",
    bits: bool = False,
) -> MetricsPaths:
    """Write per-turn uncertainty and flip tables (CSV and JSONL).

    Adds mean-over-problems rows per turn to the uncertainty table and
    pooled-count rows per turn pair to the flip table. The decomposition
    identity is re-checked on every exported row.
    """
    if not transcripts:
        raise ValidationError("nothing to export")
    n_set = {t.config.n_agents for t in transcripts}
    if len(n_set) > 1:
        raise ValidationError("transcripts disagree on agent count")
    n = n_set.pop()

    turn_rows: list[dict] = []
    flip_rows: list[dict] = []
    for transcript in transcripts:
        turn_rows.extend(_turn_rows(transcript, bits))
        flip_rows.extend(_flip_rows(transcript))
    turn_rows.extend(_mean_rows(turn_rows, ("turn",), MEAN_ROW_ID))
    flip_rows.extend(_total_flip_rows(flip_rows))

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    turn_columns = (
        ["problem_id", "turn", "total", "epistemic", "aleatoric"]
        + [f"accuracy_agent{i}" for i in range(n)]
        + [f"entropy_agent{i}" for i in range(n)]
    )
    flip_columns = [
        "problem_id", "turn_from", "turn_to", "c2c", "c2w", "w2c", "w2w", "flip_ratio",
    ]
    paths = MetricsPaths(
        turn_csv=out / "turn_metrics.csv",
        turn_jsonl=out / "turn_metrics.jsonl",
        flip_csv=out / "flip_transitions.csv",
        flip_jsonl=out / "flip_transitions.jsonl",
    )
    _write_csv(paths.turn_csv, turn_rows, turn_columns)
    _write_jsonl(paths.turn_jsonl, turn_rows)
    _write_csv(paths.flip_csv, flip_rows, flip_columns)
    _write_jsonl(paths.flip_jsonl, flip_rows)
    return paths


# ---------------------------------------------------------------------------
# Training batches


def export_training_batch(
    transcript: Transcript,
    records: Sequence[AdvantageRecord],
    path: "str | os.PathLike[str]",
) -> None:
    """Write a schema-versioned JSONL batch for an external trainer.

    Each record carries the rebuilt prompt, the response text, logprobs,
    both reward parts, the advantage triple, and its group coordinates.
    Records without logprobs are exported flagged rather than dropped: the
    trainer decides. An empty record list still produces a valid header.
    """
    from .engine import build_context

    by_cell: dict[tuple[int, int], list[Response]] = {}
    for r in transcript.responses:
        by_cell.setdefault((r.trajectory_id, r.turn), []).append(r)
    response_at = {
        (r.trajectory_id, r.turn, r.agent_id): r for r in transcript.responses
    }
    if records and not transcript.question:
        raise ValidationError(
            "transcript lacks the problem question needed to rebuild prompts"
        )
    problem = Problem(
        problem_id=transcript.problem_id,
        question=transcript.question or "(empty)",
        ground_truth=transcript.ground_truth or "(empty)",
    )

    lines = [
        {
            "kind": "batch-header",
            "schema_version": SCHEMA_VERSION,
            "problem_id": transcript.problem_id,
            "n_agents": transcript.config.n_agents,
            "n_turns": transcript.config.n_turns,
            "group_size": transcript.config.n_rollouts,
            "record_count": len(records),
        }
    ]
    for rec in sorted(records, key=lambda r: (r.turn, r.agent_id, r.trajectory_id)):
        response = response_at.get((rec.trajectory_id, rec.turn, rec.agent_id))
        if response is None:
            raise ValidationError(
                f"record addresses a missing response: trajectory "
                f"{rec.trajectory_id}, turn {rec.turn}, agent {rec.agent_id}"
            )
        if rec.turn == 1:
            prompt = build_context(
                problem, (), 1, transcript.config.template_set,
                transcript.config.max_prompt_chars,
            ).rendered_prompt
        else:
            peers = by_cell.get((rec.trajectory_id, rec.turn - 1), [])
            prompt = build_context(
                problem, peers, rec.turn, transcript.config.template_set,
                transcript.config.max_prompt_chars,
            ).rendered_prompt
        lines.append(
            {
                "kind": "record",
                "problem_id": rec.problem_id,
                "agent_id": rec.agent_id,
                "turn": rec.turn,
                "trajectory_id": rec.trajectory_id,
                "prompt": prompt,
                "response": response.text,
                "token_logprobs": (
                    list(response.token_logprobs)
                    if response.token_logprobs is not None
                    else None
                ),
                "reward_correct": rec.reward_correct,
                "reward_intrinsic": rec.reward_intrinsic,
                "reward_total": rec.reward_total,
                "advantage": rec.advantage,
                "weight": rec.weight,
                "shaped_advantage": rec.shaped_advantage,
                "nll_mean": rec.nll_mean,
                "nll_standardized": rec.nll_standardized,
                "nll_missing": rec.nll_missing,
            }
        )
    payload = "".join(
        json.dumps(line, ensure_ascii=False, separators=(",", ":")) + "\n"
        for line in lines
    )
    Path(path).write_text(payload, encoding="utf-8")


def load_training_batch(
    path: "str | os.PathLike[str]",
) -> tuple[dict, list[dict]]:
    """Round-trip reader for exported batches."""
    header: Optional[dict] = None
    records: list[dict] = []
    offset = 0
    with open(path, "rb") as fh:
        for raw in fh:
            line = raw.strip()
            if line:
                try:
                    record = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise StorageError(
                        f"byte offset {offset}: malformed or truncated record ({exc.msg})"
                    ) from exc
                if record.get("kind") == "batch-header":
                    if record.get("schema_version") != SCHEMA_VERSION:
                        raise StorageError(
                            f"unsupported schema version {record.get('schema_version')!r}"
                        )
                    header = record
                else:
                    records.append(record)
            offset += len(raw)
    if header is None:
        raise StorageError("batch has no header record")
    return header, records
