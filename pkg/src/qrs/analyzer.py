"""Analyzer agent: diffs old and new paths and builds the QoS request for the new one."""

from __future__ import annotations

from dataclasses import replace

from .core import AnalyzerState, DiffResult, FlowSpec, Path
from .wire import AnalyzeReply, AnalyzeRequest, QosExtractReply, QosExtractRequest


class NoPendingRequest(Exception):
    pass


def diff_paths(old: Path, new: Path) -> DiffResult:
    """Positional comparison of two paths.

    Positions past the shorter path land in the longer path's diff table
    without a counterpart, so ``h`` counts only paired differences.
    """
    same, diff1, diff2 = [], [], []
    n = min(len(old), len(new))
    for a, b in zip(old[:n], new[:n]):
        if a == b:
            same.append(a)
        else:
            diff1.append(a)
            diff2.append(b)
    h, k = len(diff1), len(same)
    diff1.extend(old[n:])
    diff2.extend(new[n:])
    return DiffResult(tuple(same), tuple(diff1), tuple(diff2), h, k)


def build_qos_request(diff: DiffResult, old_spec: FlowSpec, new: Path):
    """End-to-end spec is preserved; every new-path diff station gets a copy of it."""
    return old_spec, [(sid, old_spec) for sid in diff.diff2]


def analyzer_step(state: AnalyzerState, event) -> tuple[AnalyzerState, list]:
    if isinstance(event, AnalyzeRequest):
        diff = diff_paths(event.old_path, event.new_path)
        state = replace(state, connector_flag=1, same_table=diff.same,
                        diff1_table=diff.diff1, diff2_table=diff.diff2,
                        new_path=event.new_path)
        if not diff.diff1 and not diff.diff2:
            # identical paths: the standing request is reused untouched
            reply = AnalyzeReply(state.connector_id, state.reserved_spec, ())
            return replace(state, connector_flag=0, new_path=None), [reply]
        return state, [QosExtractRequest(state.analyzer_id, event.new_path)]

    if isinstance(event, QosExtractReply):
        if state.connector_flag != 1 or state.new_path is None:
            raise NoPendingRequest(f"analyzer {state.analyzer_id} has no open request")
        diff = DiffResult(state.same_table, state.diff1_table, state.diff2_table,
                          0, len(state.same_table))
        spec, per_station = build_qos_request(diff, event.qos_request, state.new_path)
        reply = AnalyzeReply(state.connector_id, spec, tuple(per_station))
        return replace(state, connector_flag=0, new_path=None), [reply]

    raise TypeError(f"analyzer cannot handle {type(event).__name__}")
