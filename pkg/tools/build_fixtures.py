#!/usr/bin/env python3
"""Regenerate the bundled dataset and replay fixtures.

The 50-sample dataset is derived from the bundled corpus and rule file so
that the rule provider scores 100% IFC/GP/IC under the snapshot+instruction
setting; this script verifies that before writing anything. Replay fixtures
encode the published per-trial positives for the three preliminary rows and
the formal 200-sample row.

Run from the repo root:  python tools/build_fixtures.py
"""

from __future__ import annotations

import json
from pathlib import Path

from vcop.bundled import load_bundled_corpus, load_bundled_rules
from vcop.corpus import Severity, find_procedure, validate_corpus
from vcop.evaluation import evaluate, load_dataset
from vcop.pipeline import InputSetting, RuleBasedProvider
from vcop.retrieval import build_index
from vcop.situation import DisplayKind, classify, parse_panel_text

DATA_DIR = Path(__file__).resolve().parent.parent / "src" / "vcop" / "data"

E_WD = DisplayKind.ENGINE_WARNING
PFD = DisplayKind.PRIMARY_FLIGHT
SYS = DisplayKind.SYSTEMS

# nominal parameter blocks per display kind; anomaly panels override lines
EWD_NOMINAL = "N1_1=85.2 %\nN1_2=85.4 %\nEGT_1=525 C\nEGT_2=530 C"
PFD_NOMINAL = "SPD=250 KT\nALT=32000 FT\nHDG=270 DEG\nVS=0 FT/MIN"
SYS_NOMINAL = "CAB_ALT=7500 FT\nHYD_G_PR=3000 PSI\nHYD_B_PR=3000 PSI\nHYD_Y_PR=3000 PSI"

# (procedure_id, label, display, panel, instruction)
ANOMALY_SPECS = [
    ("ENG_1_FIRE", "ENG_1_FIRE", E_WD,
     "N1_1=42.0 %\nN1_2=85.4 %\nEGT_1=975 C\nEGT_2=530 C\n! ENG 1 FIRE",
     "ECAM actions"),
    ("ENG_2_FIRE", "ENG_2_FIRE", E_WD,
     "N1_1=85.2 %\nN1_2=41.0 %\nEGT_1=525 C\nEGT_2=980 C\n! ENG 2 FIRE",
     "ECAM actions"),
    ("ENG_1_FAIL", "ENG_1_FAIL", E_WD,
     "N1_1=12.0 %\nN1_2=85.4 %\nEGT_1=310 C\nEGT_2=530 C\n* ENG 1 FAIL",
     "ECAM actions"),
    ("ENG_2_FAIL", "ENG_2_FAIL", E_WD,
     "N1_1=85.2 %\nN1_2=11.0 %\nEGT_1=525 C\nEGT_2=305 C\n* ENG 2 FAIL",
     "run the engine failure checklist"),
    ("ALL_ENG_FAIL", "DUAL_ENG_FAIL", E_WD,
     "N1_1=9.0 %\nN1_2=8.5 %\nEGT_1=240 C\nEGT_2=235 C\n! ALL ENG FAIL",
     "ECAM actions"),
    ("ENG_1_STALL", "ENG_1_STALL", E_WD,
     EWD_NOMINAL + "\n* ENG 1 STALL", "ECAM actions"),
    ("ENG_2_STALL", "ENG_2_STALL", E_WD,
     EWD_NOMINAL + "\n* ENG 2 STALL", "ECAM actions"),
    ("ENG_OIL_LO_PR", "ENG_OIL_LO_PR", E_WD,
     "N1_1=85.2 %\nN1_2=85.4 %\nOIL_PR_1=11 PSI\n* ENG OIL LO PR",
     "ECAM actions"),
    ("ENG_1_REV_UNLOCKED", "ENG_1_REV_UNLOCKED", E_WD,
     EWD_NOMINAL + "\n! ENG 1 REVERSER UNLOCKED", "ECAM actions"),
    ("APU_FIRE", "APU_FIRE", E_WD,
     EWD_NOMINAL + "\n! APU FIRE", "ECAM actions"),
    ("APU_FAULT", "APU_FAULT", E_WD,
     EWD_NOMINAL + "\n* APU FAULT", "ECAM actions"),
    ("OVERSPEED", "OVERSPEED", PFD,
     "SPD=372 KT\nALT=31000 FT\nHDG=270 DEG\nVS=-1200 FT/MIN",
     "overspeed recovery"),
    ("STALL_RECOVERY", "STALL_WARNING", PFD,
     "SPD=118 KT\nALT=9000 FT\nHDG=090 DEG\nVS=-600 FT/MIN\n! STALL STALL",
     "ECAM actions"),
    ("WINDSHEAR", "WINDSHEAR", PFD,
     "SPD=138 KT\nALT=1400 FT\nHDG=180 DEG\nVS=-900 FT/MIN\n! WINDSHEAR",
     "ECAM actions"),
    ("AP_OFF_INVOL", "AP_OFF_INVOL", PFD,
     "SPD=250 KT\nALT=32000 FT\nHDG=270 DEG\nVS=0 FT/MIN\n* AP OFF",
     "ECAM actions"),
    ("RA_1_FAULT", "RA_1_FAULT", PFD,
     PFD_NOMINAL + "\n* RA 1 FAULT", "ECAM actions"),
    ("ADR_1_FAULT", "ADR_1_FAULT", PFD,
     PFD_NOMINAL + "\n* NAV ADR 1 FAULT", "ECAM actions"),
    ("IR_2_FAULT", "IR_2_FAULT", PFD,
     PFD_NOMINAL + "\n* NAV IR 2 FAULT", "ECAM actions"),
    ("ELAC_1_FAULT", "ELAC_1_FAULT", SYS,
     SYS_NOMINAL + "\n* F CTL ELAC 1 FAULT", "ECAM actions"),
    ("SPLR_FAULT", "SPLR_FAULT", SYS,
     SYS_NOMINAL + "\n* F CTL SPLR FAULT", "ECAM actions"),
    ("HYD_G_SYS_LO_PR", "HYD_G_SYS_LO_PR", SYS,
     "CAB_ALT=7500 FT\nHYD_G_PR=320 PSI\nHYD_B_PR=3000 PSI\nHYD_Y_PR=3000 PSI\n* HYD G SYS LO PR",
     "ECAM actions"),
    ("HYD_B_SYS_LO_PR", "HYD_B_SYS_LO_PR", SYS,
     "CAB_ALT=7500 FT\nHYD_G_PR=3000 PSI\nHYD_B_PR=280 PSI\nHYD_Y_PR=3000 PSI\n* HYD B SYS LO PR",
     "ECAM actions"),
    ("HYD_Y_SYS_LO_PR", "HYD_Y_SYS_LO_PR", SYS,
     "CAB_ALT=7500 FT\nHYD_G_PR=3000 PSI\nHYD_B_PR=3000 PSI\nHYD_Y_PR=260 PSI\n* HYD Y SYS LO PR",
     "ECAM actions"),
    ("HYD_G_Y_SYS_LO_PR", "HYD_G_Y_SYS_LO_PR", SYS,
     "CAB_ALT=7500 FT\nHYD_G_PR=310 PSI\nHYD_B_PR=3000 PSI\nHYD_Y_PR=295 PSI\n! HYD G PLUS Y SYS LO PR",
     "ECAM actions"),
    ("GEAR_NOT_DOWN", "LG_GEAR_NOT_DOWN", SYS,
     SYS_NOMINAL + "\n! L G GEAR NOT DOWN", "ECAM actions"),
    ("BRAKES_HOT", "BRAKES_HOT", SYS,
     "CAB_ALT=200 FT\nBRK_TEMP=520 C\nHYD_G_PR=3000 PSI", "ECAM actions"),
    ("ELEC_EMER_CONFIG", "ELEC_EMER_CONFIG", SYS,
     SYS_NOMINAL + "\n! ELEC EMER CONFIG", "ECAM actions"),
    ("GEN_1_FAULT", "GEN_1_FAULT", SYS,
     SYS_NOMINAL + "\n* ELEC GEN 1 FAULT", "ECAM actions"),
    ("BAT_1_FAULT", "BAT_1_FAULT", SYS,
     "CAB_ALT=7500 FT\nBAT_1=21.5 V\nBAT_2=28.1 V\n* ELEC BAT 1 FAULT",
     "ECAM actions"),
    ("FUEL_LEAK", "FUEL_LEAK", SYS,
     "CAB_ALT=7500 FT\nFOB=4200 KG\nFUEL_L=1500 KG\nFUEL_R=2700 KG\n! FUEL LEAK",
     "fuel leak confirm and isolate"),
    ("FUEL_L_TK_LO_LVL", "FUEL_L_TK_LO_LVL", SYS,
     "CAB_ALT=7500 FT\nFUEL_L=640 KG\nFUEL_R=2400 KG\n* FUEL L TK LO LVL",
     "ECAM actions"),
    ("FUEL_IMBALANCE", "FUEL_IMBALANCE", SYS,
     "CAB_ALT=7500 FT\nFUEL_L=900 KG\nFUEL_R=2600 KG\n* FUEL IMBALANCE",
     "ECAM actions"),
    ("EXCESS_CAB_ALT", "EXCESS_CAB_ALT", SYS,
     "CAB_ALT=14200 FT\nCAB_RATE=1800 FT/MIN\nDELTA_P=0.4 PSI",
     "emergency descent procedure"),
    ("CAB_PR_SYS_1_FAULT", "CAB_PR_SYS_1_FAULT", SYS,
     SYS_NOMINAL + "\n* CAB PR SYS 1 FAULT", "ECAM actions"),
    ("SMOKE_LAVATORY", "SMOKE_LAVATORY", SYS,
     SYS_NOMINAL + "\n! LAVATORY SMOKE", "ECAM actions"),
    ("SMOKE_AVNCS", "SMOKE_AVNCS", SYS,
     SYS_NOMINAL + "\n! AVNCS SMOKE", "ECAM actions"),
    ("CARGO_SMOKE_FWD", "CARGO_SMOKE_FWD", SYS,
     SYS_NOMINAL + "\n! FWD CARGO SMOKE", "ECAM actions"),
    ("BLEED_1_FAULT", "BLEED_1_FAULT", SYS,
     SYS_NOMINAL + "\n* AIR ENG 1 BLEED FAULT", "ECAM actions"),
]

# (display, panel, instruction) for the twelve NORMAL samples
NORMAL_SPECS = [
    (E_WD, EWD_NOMINAL, "clear status"),
    (E_WD, EWD_NOMINAL + "\nFF_1=1150 KG/H\nFF_2=1148 KG/H", "check the error"),
    (E_WD, "N1_1=22.0 %\nN1_2=22.1 %\nEGT_1=410 C\nEGT_2=408 C", "clear status"),
    (E_WD, EWD_NOMINAL + "\nSEAT BELTS", "ECAM actions"),
    (PFD, PFD_NOMINAL, "clear status"),
    (PFD, "SPD=140 KT\nALT=2200 FT\nHDG=045 DEG\nVS=-700 FT/MIN", "check the error"),
    (PFD, "SPD=320 KT\nALT=36000 FT\nHDG=310 DEG\nVS=0 FT/MIN", "ECAM actions"),
    (PFD, PFD_NOMINAL + "\n#FLAG AP1\n#FLAG ATHR", "clear status"),
    (SYS, SYS_NOMINAL, "clear status"),
    (SYS, SYS_NOMINAL + "\nBRK_TEMP=145 C", "check the error"),
    (SYS, "CAB_ALT=6900 FT\nFUEL_L=2400 KG\nFUEL_R=2400 KG", "ECAM actions"),
    (SYS, SYS_NOMINAL + "\n#FLAG PACK1\n#FLAG PACK2", "clear status"),
]


def build_samples() -> list[dict]:
    corpus = load_bundled_corpus()
    report = validate_corpus(corpus)
    assert report.ok, report.findings
    rules = load_bundled_rules()
    records = []
    n = 0

    for proc_id, label, display, panel, instruction in ANOMALY_SPECS:
        n += 1
        procedure = find_procedure(corpus, proc_id)
        assert procedure is not None, proc_id
        assert label in procedure.condition_tags, (proc_id, label)
        snapshot = parse_panel_text(panel, display)
        assert not snapshot.errata, (proc_id, snapshot.errata)
        condition = classify(snapshot, rules)
        assert condition.labels == (label,), (proc_id, condition)
        assert condition.condition_class is procedure.severity, (
            proc_id, condition.condition_class, procedure.severity)
        records.append({
            "id": f"S{n:03d}",
            "display": display.value,
            "panel": panel,
            "instruction": instruction,
            "expected_class": procedure.severity.value,
            "expected_labels": [label],
            "expected_procedure_id": proc_id,
            "expected_section": procedure.source.section_number,
            "expected_page": procedure.source.page,
            "error_label": None,
        })

    for display, panel, instruction in NORMAL_SPECS:
        n += 1
        snapshot = parse_panel_text(panel, display)
        assert not snapshot.errata, (panel, snapshot.errata)
        condition = classify(snapshot, load_bundled_rules())
        assert condition.is_normal, (panel, condition)
        records.append({
            "id": f"S{n:03d}",
            "display": display.value,
            "panel": panel,
            "instruction": instruction,
            "expected_class": Severity.NORMAL.value,
            "expected_labels": [],
            "expected_procedure_id": None,
            "expected_section": None,
            "expected_page": None,
            "error_label": None,
        })
    return records


def verify_dataset(text: str) -> None:
    """The bundled dataset must score 100/100/100 under every setting."""
    corpus = load_bundled_corpus()
    rules = load_bundled_rules()
    index = build_index(corpus)
    provider = RuleBasedProvider(rules)
    samples = load_dataset(text)
    assert len(samples) == 50
    for setting in InputSetting:
        rep = evaluate(samples, setting, provider, index, corpus)
        assert (rep.ifc_count, rep.gp_count, rep.ic_count) == (50, 50, 50), (
            setting,
            rep.ifc_count,
            rep.gp_count,
            rep.ic_count,
            [t for t in rep.per_trial if t.score != type(t.score)(1, 1, 1)][:5],
        )


def score_stream(setting: str, positives: tuple[int, int, int], n: int) -> list[str]:
    """Per-trial scores realizing the given positive counts, gating intact."""
    ifc_n, gp_n, ic_n = positives
    lines = []
    for i in range(n):
        ifc = int(i < ifc_n)
        gp = int(i < gp_n) * ifc
        ic = int(i < ic_n) * gp
        record = {
            "id": f"T{i + 1:03d}",
            "setting": setting,
            "ifc": ifc,
            "gp": gp,
            "ic": ic,
            "error_label": None,
        }
        lines.append(json.dumps(record))
    return lines


def main() -> None:
    records = build_samples()
    dataset_text = "\n".join(json.dumps(r) for r in records) + "\n"
    verify_dataset(dataset_text)
    (DATA_DIR / "dataset.jsonl").write_text(dataset_text, encoding="utf-8")
    print(f"wrote dataset.jsonl ({len(records)} samples)")

    preliminary = (
        score_stream("SNAPSHOT_ONLY", (41, 30, 30), 50)
        + score_stream("SNAPSHOT_PLUS_INSTRUCTION", (47, 43, 36), 50)
        + score_stream("OCR_PLUS_INSTRUCTION", (37, 30, 23), 50)
    )
    (DATA_DIR / "replay_preliminary.jsonl").write_text(
        "\n".join(preliminary) + "\n", encoding="utf-8"
    )
    print("wrote replay_preliminary.jsonl (3 x 50 trials)")

    formal = score_stream("SNAPSHOT_PLUS_INSTRUCTION", (181, 171, 141), 200)
    (DATA_DIR / "replay_formal.jsonl").write_text(
        "\n".join(formal) + "\n", encoding="utf-8"
    )
    print("wrote replay_formal.jsonl (200 trials)")


if __name__ == "__main__":
    main()
