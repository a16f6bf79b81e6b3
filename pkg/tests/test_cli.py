"""End-to-end tests of the command-line front end (no network)."""

import json
from pathlib import Path

import pytest

from specter_semcom.cli import main

SKI = str(Path(__file__).resolve().parent / "fixtures" / "ski_scene.json")


@pytest.fixture
def stats_file(tmp_path, corpus_dir):
    path = tmp_path / "stats.bin"
    assert main(["ingest", "--corpus", str(corpus_dir), "--out", str(path)]) == 0
    return path


# --- ingest ---


def test_ingest_is_deterministic(tmp_path, corpus_dir, capsys):
    first, second = tmp_path / "a.bin", tmp_path / "b.bin"
    assert main(["ingest", "--corpus", str(corpus_dir), "--out", str(first)]) == 0
    assert main(["ingest", "--corpus", str(corpus_dir), "--out", str(second)]) == 0
    assert first.read_bytes() == second.read_bytes()
    assert capsys.readouterr().out.splitlines()[0] == "scenes=3 triples=10"


# --- filter ---


def test_filter_prints_kept_triples_and_writes_report(
    tmp_path, stats_file, ski_embeddings, capsys
):
    report = tmp_path / "report.json"
    out = tmp_path / "filtered.json"
    code = main(
        [
            "filter",
            "--scene",
            SKI,
            "--stats",
            str(stats_file),
            "--embedder",
            "file",
            "--embeddings-file",
            str(ski_embeddings),
            "--report",
            str(report),
            "--out",
            str(out),
        ]
    )
    assert code == 0
    captured = capsys.readouterr()
    assert captured.out.splitlines() == ["man riding ski", "man holding pole"]
    assert "seed=0" in captured.err

    document = json.loads(report.read_text())
    assert document["seed"] == 0
    assert document["input_relations"] == 5
    assert [r["sentence"] for r in document["removed_by_redundancy"]] == ["pole in hand"]
    filtered = json.loads(out.read_text())
    assert len(filtered["relations"]) == 2
    assert len(filtered["objects"]) == 5


# --- select ---


@pytest.mark.parametrize(
    "task, fidelity, expected",
    [
        ("generation", "minimal", "sg_filtered"),
        ("detection", "full", "segmap"),
        ("classification", "standard", "objects"),
    ],
)
def test_select(capsys, task, fidelity, expected):
    assert main(["select", "--task", task, "--fidelity", fidelity]) == 0
    assert capsys.readouterr().out.strip() == expected


def test_select_with_policy_override(tmp_path, capsys):
    policy = tmp_path / "policy.txt"
    policy.write_text("detection,full=objects_layouts+segmap\n")
    argv = ["select", "--task", "detection", "--fidelity", "full", "--policy", str(policy)]
    assert main(argv) == 0
    assert capsys.readouterr().out.strip() == "objects_layouts+segmap"


# --- encode ---


def test_encode_objects(tmp_path, capsys):
    report = tmp_path / "payload.json"
    payload = tmp_path / "payload.bin"
    code = main(
        [
            "encode",
            "--scene",
            SKI,
            "--kinds",
            "objects",
            "--out",
            str(payload),
            "--report",
            str(report),
        ]
    )
    assert code == 0
    assert capsys.readouterr().out.startswith("bits=256 ")
    assert payload.read_bytes().startswith(b"SPAY")
    document = json.loads(report.read_text())
    assert document["sections"] == [{"kind": "objects", "bits": 184}]


def test_encode_compressed_image_sized_from_bpp(capsys):
    argv = ["encode", "--scene", SKI, "--kinds", "compressed_image"]
    assert main([*argv, "--compressed-image-bpp", "0.18"]) == 0
    assert capsys.readouterr().out.startswith("bits=47256 ")
    assert main([*argv, "--compressed-image-bytes", "100"]) == 0
    assert capsys.readouterr().out.startswith("bits=872 ")


def test_compressed_image_without_size_fails(capsys):
    assert main(["encode", "--scene", SKI, "--kinds", "compressed_image"]) == 1
    assert "error: CodecError" in capsys.readouterr().err


def test_compressed_image_size_flags_are_exclusive():
    with pytest.raises(SystemExit) as exc:
        main(
            [
                "encode",
                "--scene",
                SKI,
                "--kinds",
                "compressed_image",
                "--compressed-image-bpp",
                "0.18",
                "--compressed-image-bytes",
                "100",
            ]
        )
    assert exc.value.code == 2


def test_encode_filtered_scene_graph_for_task(stats_file, ski_embeddings, capsys):
    code = main(
        [
            "encode",
            "--scene",
            SKI,
            "--task",
            "generation",
            "--fidelity",
            "standard",
            "--stats",
            str(stats_file),
            "--embedder",
            "file",
            "--embeddings-file",
            str(ski_embeddings),
        ]
    )
    assert code == 0
    assert capsys.readouterr().out.startswith("bits=976 ")


def test_encode_needs_exactly_one_source(capsys):
    code = main(["encode", "--scene", SKI, "--kinds", "objects", "--task", "classification"])
    assert code == 1
    assert "error: ValueError" in capsys.readouterr().err


# --- simulate and sweep ---


def test_simulate_writes_bler_csv(tmp_path, capsys):
    out = tmp_path / "bler.csv"
    argv = ["simulate", "--snrs", "inf", "--rate", "1/2", "--blocks", "2", "--seed", "7"]
    code = main([*argv, "--out", str(out)])
    assert code == 0
    assert "seed=7" in capsys.readouterr().err
    assert out.read_text().splitlines() == [
        "info_block_bits,code_rate,snr_db,blocks_sent,block_errors,bler,seed",
        "1056,1/2,inf,2,0,0.000000,7",
    ]


def test_sweep_on_ideal_link(corpus_dir, tmp_path, capsys):
    report = tmp_path / "bler.csv"
    code = main(
        [
            "sweep",
            "--corpus",
            str(corpus_dir),
            "--kinds",
            "objects,objects_layouts,sg_filtered",
            "--ideal-link",
            "--dim",
            "16",
            "--report",
            str(report),
        ]
    )
    assert code == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "kind,snr_db,code_rate,bler,avg_payload_bits,images_per_second"
    assert len(lines) == 1 + 3 * 4
    assert [line.split(",")[1] for line in lines[1:5]] == ["0", "2", "6", "16"]
    assert all(line.split(",")[2] == "5/6" for line in lines[1:])
    assert len(report.read_text().splitlines()) == 1 + 4 * 4


def test_sweep_compares_compressed_image(corpus_dir, capsys):
    code = main(
        [
            "sweep",
            "--corpus",
            str(corpus_dir),
            "--kinds",
            "sg,compressed_image",
            "--ideal-link",
            "--compressed-image-bpp",
            "0.18",
        ]
    )
    assert code == 0
    rows = [line.split(",") for line in capsys.readouterr().out.splitlines()[1:]]
    bits = {row[0]: float(row[4]) for row in rows}
    assert len(rows) == 2 * 4
    assert bits["compressed_image"] > bits["sg"] > 0


def test_sweep_is_identical_across_worker_counts(corpus_dir, tmp_path):
    outputs = []
    for workers in ("1", "3"):
        out, report = tmp_path / f"sweep{workers}.csv", tmp_path / f"bler{workers}.csv"
        argv = ["sweep", "--corpus", str(corpus_dir), "--kinds", "objects,sg"]
        argv += ["--snrs", "0,6", "--blocks", "6", "--seed", "4", "--workers", workers]
        assert main([*argv, "--out", str(out), "--report", str(report)]) == 0
        outputs.append((out.read_bytes(), report.read_bytes()))
    assert outputs[0] == outputs[1]
    assert len(outputs[0][1].splitlines()) == 1 + 4 * 2


# --- latency ---


@pytest.mark.parametrize("mode, expected", [("sequential", "10.0000"), ("pipelined", "25.0000")])
def test_latency_from_profile(tmp_path, capsys, mode, expected):
    profile = tmp_path / "profile.txt"
    profile.write_text("tau_se=30,tau_ce=0,tau_tx=10,tau_cd=40,tau_task=20\n")
    assert main(["latency", "--profile", str(profile), "--mode", mode]) == 0
    assert capsys.readouterr().out.strip() == expected


def test_latency_computes_transmission_time(tmp_path, capsys):
    profile = tmp_path / "profile.txt"
    profile.write_text("tau_se=1,tau_cd=1,tau_task=1\n")
    code = main(
        [
            "latency",
            "--profile",
            str(profile),
            "--scene",
            SKI,
            "--kinds",
            "objects",
            "--snrs",
            "0",
            "--rate",
            "1/3",
            "--ideal-link",
        ]
    )
    assert code == 0
    assert capsys.readouterr().out.strip() == "129.6296"


def test_latency_without_tau_tx_or_scene_fails(tmp_path, capsys):
    profile = tmp_path / "profile.txt"
    profile.write_text("tau_se=1,tau_cd=1,tau_task=1\n")
    assert main(["latency", "--profile", str(profile)]) == 1
    assert "tau_tx" in capsys.readouterr().err


# --- exit codes ---


def test_missing_input_file_is_usage_error(tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["encode", "--scene", str(tmp_path / "nope.json"), "--kinds", "objects"])
    assert exc.value.code == 2


def test_unknown_kind_is_usage_error():
    with pytest.raises(SystemExit) as exc:
        main(["encode", "--scene", SKI, "--kinds", "hologram"])
    assert exc.value.code == 2


def test_malformed_scene_is_runtime_error(tmp_path, capsys):
    scene = tmp_path / "bad.json"
    scene.write_text("{not json")
    assert main(["encode", "--scene", str(scene), "--kinds", "objects"]) == 1
    assert "error: ParseError" in capsys.readouterr().err
