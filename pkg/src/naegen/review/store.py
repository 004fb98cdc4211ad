"""Review-queue state over a campaign directory.

The store owns two artifacts: the campaign's trace directories (read-only
here) and an append-only ``labels.jsonl`` log.  Everything else (queue
status, majority verdicts, the labeled report) is recomputed from those on
demand, so the log is the single source of truth and a crashed process can
never leave a stale aggregate behind.

Aggregation across reviewers: the latest label per (candidate, reviewer)
stands, then each verdict component (ground_truth_preserved, natural,
assigned_label) takes its own majority over reviewers.  A tied component
stays unresolved and the candidate remains pending for the affected rate.
"""

from __future__ import annotations

import json
import os
import threading
from collections import Counter
from pathlib import Path
from typing import Optional

from ..errors import CorruptCampaign, NotFound, ValidationError
from ..harness import RunRecord, build_report, CampaignReport
from ..traces import load_frame, load_trace_manifest
from ..types import OracleLabel

LABELS_FILE = "labels.jsonl"
REPORT_FILE = "report.json"
CAMPAIGN_FILE = "campaign.json"


def _tri_and(a: Optional[bool], b: Optional[bool]) -> Optional[bool]:
    """Three-valued AND: False dominates, None (unknown) propagates."""
    if a is False or b is False:
        return False
    if a is None or b is None:
        return None
    return True


def _majority_bool(values: list[bool]) -> Optional[bool]:
    counts = Counter(values)
    if counts[True] > counts[False]:
        return True
    if counts[False] > counts[True]:
        return False
    return None


def _majority_value(values: list):
    """(resolved, value) under strict plurality; ties stay unresolved."""
    ranked = Counter(values).most_common()
    if len(ranked) == 1 or ranked[0][1] > ranked[1][1]:
        return True, ranked[0][0]
    return False, None


class ReviewStore:
    """Queue, labels, and report recomputation for one campaign directory."""

    def __init__(self, campaign_dir: Path, *, all_steps: bool = False):
        self.campaign_dir = Path(campaign_dir)
        self.all_steps = all_steps
        self._write_lock = threading.Lock()

        campaign_path = self.campaign_dir / CAMPAIGN_FILE
        if not campaign_path.is_file():
            raise CorruptCampaign(f"no {CAMPAIGN_FILE} under {self.campaign_dir}")
        self.campaign = json.loads(campaign_path.read_text(encoding="utf-8"))
        if self.campaign.get("schema_version") != 1:
            raise CorruptCampaign(
                f"unsupported campaign schema {self.campaign.get('schema_version')!r}")

        self._runs: dict[str, dict] = {}
        self._items: dict[str, dict] = {}
        for class_name, info in sorted(self.campaign["classes"].items()):
            for j, _seed in enumerate(info["latent_seeds"]):
                run_id = f"{class_name}_{j:03d}"
                manifest = load_trace_manifest(self._trace_dir(run_id),
                                               verify_digests=True)
                self._runs[run_id] = {
                    "class_name": class_name,
                    "class_index": info["class_index"],
                    "manifest": manifest,
                }
                self._index_candidates(run_id, class_name, manifest)

        self._labels: dict[tuple[str, str], OracleLabel] = {}
        self._replay_labels()

    # ------------------------------------------------------------ indexing

    def _trace_dir(self, run_id: str) -> Path:
        return self.campaign_dir / "runs" / run_id

    def _index_candidates(self, run_id: str, class_name: str, manifest: dict) -> None:
        first = manifest["first_adversarial_step"]
        if first is None:
            return
        steps = [entry for entry in manifest["steps"] if entry["adversarial"]]
        if not self.all_steps:
            steps = [entry for entry in steps if entry["step"] == first]
        for entry in steps:
            candidate_id = f"{run_id}:{entry['step']}"
            self._items[candidate_id] = {
                "candidate_id": candidate_id,
                "run_id": run_id,
                "class_name": class_name,
                "step": entry["step"],
                "decides_run": entry["step"] == first,
                "expected_class": manifest["expected_class"],
                "predicted_class": entry["predicted_class"],
                "init_image": f"/api/runs/{run_id}/frames/0",
                "candidate_image": f"/api/runs/{run_id}/frames/{entry['step']}",
            }

    def _replay_labels(self) -> None:
        path = self.campaign_dir / LABELS_FILE
        if not path.is_file():
            return
        for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
            if not line.strip():
                continue
            try:
                label = OracleLabel.from_dict(json.loads(line))
            except (json.JSONDecodeError, KeyError, ValueError) as exc:
                raise CorruptCampaign(
                    f"unreadable label at {path}:{lineno}: {exc}") from exc
            self._labels[(label.candidate_id, label.reviewer)] = label

    # ------------------------------------------------------------- queries

    def queue_size(self) -> int:
        return len(self._items)

    def candidate_ids(self) -> list[str]:
        return sorted(self._items)

    def _labels_for(self, candidate_id: str) -> list[OracleLabel]:
        return [label for (cid, _), label in sorted(self._labels.items())
                if cid == candidate_id]

    def resolution(self, candidate_id: str) -> dict:
        """Majority verdicts plus the derived strict/relaxed outcome."""
        item = self._items.get(candidate_id)
        if item is None:
            raise NotFound(f"unknown candidate {candidate_id!r}")
        labels = self._labels_for(candidate_id)
        gtp = _majority_bool([lab.ground_truth_preserved for lab in labels]) if labels else None
        natural = _majority_bool([lab.natural for lab in labels]) if labels else None
        assigned_resolved, assigned = (_majority_value([lab.assigned_label for lab in labels])
                                       if labels else (False, None))
        mismatch = (None if not assigned_resolved
                    else assigned != item["predicted_class"])
        relaxed = _tri_and(natural, mismatch)
        strict = _tri_and(relaxed, gtp)
        return {
            "label_count": len(labels),
            "ground_truth_preserved": gtp,
            "natural": natural,
            "assigned_label_resolved": assigned_resolved,
            "assigned_label": assigned,
            "strict_success": strict,
            "relaxed_success": relaxed,
        }

    def _item_view(self, candidate_id: str) -> dict:
        item = dict(self._items[candidate_id])
        resolution = self.resolution(candidate_id)
        resolved = (resolution["strict_success"] is not None
                    and resolution["relaxed_success"] is not None)
        item["status"] = "labeled" if resolved else "pending"
        item["resolution"] = resolution
        return item

    def get_queue(self, *, status: Optional[str] = None,
                  class_name: Optional[str] = None) -> list[dict]:
        if status not in (None, "pending", "labeled"):
            raise ValidationError(f"status filter must be pending or labeled, got {status!r}")
        items = [self._item_view(cid) for cid in self.candidate_ids()]
        if status is not None:
            items = [i for i in items if i["status"] == status]
        if class_name is not None:
            items = [i for i in items if i["class_name"] == class_name]
        return items

    def get_candidate(self, candidate_id: str) -> dict:
        if candidate_id not in self._items:
            raise NotFound(f"unknown candidate {candidate_id!r}")
        view = self._item_view(candidate_id)
        view["labels"] = [label.to_dict() for label in self._labels_for(candidate_id)]
        return view

    def trace_manifest(self, run_id: str) -> dict:
        run = self._runs.get(run_id)
        if run is None:
            raise NotFound(f"unknown run {run_id!r}")
        return run["manifest"]

    def frame_png(self, run_id: str, step: int) -> bytes:
        if run_id not in self._runs:
            raise NotFound(f"unknown run {run_id!r}")
        data = load_frame(self._trace_dir(run_id), step)
        if data is None:
            raise NotFound(f"run {run_id!r} has no frame for step {step}")
        return data

    # -------------------------------------------------------------- labels

    def submit_label(self, label: OracleLabel) -> dict:
        """Append a label, rewrite the report atomically, return the new state."""
        if label.candidate_id not in self._items:
            raise NotFound(f"unknown candidate {label.candidate_id!r}")
        if label.assigned_label is not None and label.assigned_label < 0:
            raise ValidationError("assigned_label must be a class index or null")
        with self._write_lock:
            line = json.dumps(label.to_dict(), sort_keys=True)
            with open(self.campaign_dir / LABELS_FILE, "a", encoding="utf-8") as fh:
                fh.write(line + "\n")
                fh.flush()
                os.fsync(fh.fileno())
            self._labels[(label.candidate_id, label.reviewer)] = label
            report = self._write_report()
        return {
            "candidate": self._item_view(label.candidate_id),
            "report": report.to_dict(),
        }

    # -------------------------------------------------------------- report

    def run_records(self) -> list[RunRecord]:
        """Per-run outcomes with strict/relaxed resolved from current labels."""
        records = []
        for run_id, run in sorted(self._runs.items()):
            manifest = run["manifest"]
            first = manifest["first_adversarial_step"]
            if first is None:
                strict: Optional[bool] = False
                relaxed: Optional[bool] = False
            else:
                resolution = self.resolution(f"{run_id}:{first}")
                strict = resolution["strict_success"]
                relaxed = resolution["relaxed_success"]
            records.append(RunRecord(
                run_id=run_id,
                class_name=run["class_name"],
                class_index=run["class_index"],
                latent_seed=manifest["latent_seed"],
                variable_choice=manifest["config"]["variable_choice"],
                classifier_fooled=manifest["classifier_fooled"],
                first_adversarial_step=first,
                strict_success=strict,
                relaxed_success=relaxed,
                failure=manifest["failure"],
                trace_ref=f"runs/{run_id}",
            ))
        return records

    def compute_report(self) -> CampaignReport:
        """Rebuild the report from the label log; never serves a cached copy."""
        return build_report(
            self.run_records(),
            backend_name=self.campaign["backend"],
            variable_choice=self.campaign["config"]["variable_choice"],
        )

    def _write_report(self) -> CampaignReport:
        report = self.compute_report()
        path = self.campaign_dir / REPORT_FILE
        tmp = path.with_name(path.name + ".tmp")
        tmp.write_bytes(report.to_json_bytes())
        os.replace(tmp, path)
        return report
