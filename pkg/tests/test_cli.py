import json

from difflight.cli import main


def run_cli(*argv):
    return main(list(argv))


class TestRun:
    def test_smoke_writes_report_with_positive_gops(self, tmp_path, capsys):
        code = run_cli("run", "--preset", "ddpm-toy", "--arch", "4,12,3,6,6,3",
                       "--opts", "all", "--out", str(tmp_path))
        assert code == 0
        lines = (tmp_path / "report.csv").read_text().splitlines()
        gops = float(next(line for line in lines if ",gops," in line).split(",")[3])
        assert gops > 0
        assert "GOPS" in capsys.readouterr().out

    def test_waveguide_violation_exits_nonzero(self, tmp_path, capsys):
        code = run_cli("run", "--preset", "ddpm-toy", "--arch", "4,40,3,6,6,3",
                       "--out", str(tmp_path))
        assert code != 0
        assert "36-MR" in capsys.readouterr().err

    def test_byte_identical_reruns(self, tmp_path):
        out1, out2 = tmp_path / "a", tmp_path / "b"
        for out in (out1, out2):
            assert run_cli("run", "--preset", "ldm-toy", "--opts",
                           "sparsity,pipeline", "--out", str(out)) == 0
        assert (out1 / "report.csv").read_bytes() == (out2 / "report.csv").read_bytes()

    def test_trace_export(self, tmp_path):
        assert run_cli("run", "--preset", "ddpm-toy", "--opts", "none",
                       "--out", str(tmp_path), "--trace") == 0
        trace = (tmp_path / "schedule_trace.jsonl").read_text().splitlines()
        record = json.loads(trace[0])
        assert record["record"] == "pass"

    def test_workload_file_source(self, tmp_path):
        doc = {"name": "file-wl", "timesteps": 1, "input_shape": [1, 4, 4],
               "layers": [{"kind": "conv", "out_channels": 2, "kernel": 3,
                           "stride": 1, "padding": 1}]}
        path = tmp_path / "wl.json"
        path.write_text(json.dumps(doc))
        assert run_cli("run", "--workload", str(path), "--out", str(tmp_path)) == 0

    def test_infeasible_link_exit_code(self, tmp_path, capsys):
        profile = tmp_path / "lossy.cfg"
        profile.write_text("cost.block_waveguide_cm = 50\n")
        code = run_cli("run", "--preset", "ddpm-toy", "--profile", str(profile),
                       "--out", str(tmp_path))
        assert code == 3
        err = capsys.readouterr().err
        assert "short by" in err and "dB" in err

    def test_profile_env_fallback(self, tmp_path, monkeypatch, capsys):
        monkeypatch.setenv("DIFFLIGHT_PROFILE", str(tmp_path / "missing.cfg"))
        code = run_cli("run", "--preset", "ddpm-toy", "--out", str(tmp_path))
        assert code == 2
        capsys.readouterr()

    def test_profile_file_respected(self, tmp_path):
        profile = tmp_path / "fast.cfg"
        profile.write_text("eo_tune.latency = 10ns\n")
        out1, out2 = tmp_path / "default", tmp_path / "fast"
        assert run_cli("run", "--preset", "ddpm-toy", "--out", str(out1)) == 0
        assert run_cli("run", "--preset", "ddpm-toy", "--profile", str(profile),
                       "--out", str(out2)) == 0

        def latency(path):
            line = next(l for l in path.read_text().splitlines() if ",latency," in l)
            return float(line.split(",")[3])

        assert latency(out2 / "report.csv") < latency(out1 / "report.csv")

    def test_arch_from_profile_file(self, tmp_path, capsys):
        profile = tmp_path / "arch.cfg"
        profile.write_text("arch.y = 2\narch.n = 8\n")
        assert run_cli("run", "--preset", "ddpm-toy", "--profile", str(profile),
                       "--out", str(tmp_path)) == 0
        assert "arch 2/8/3/6/6/3" in capsys.readouterr().out


class TestAblate:
    def test_five_rows_baseline_one_combined_best(self, tmp_path):
        assert run_cli("ablate", "--preset", "ldm-toy", "--out", str(tmp_path)) == 0
        lines = (tmp_path / "ablation.csv").read_text().splitlines()
        assert lines[0] == "workload,variant,energy_j,normalized"
        rows = {line.split(",")[1]: float(line.split(",")[3]) for line in lines[1:]}
        assert len(rows) == 5
        assert rows["baseline"] == 1.0
        assert rows["combined"] <= min(rows["sparsity"], rows["pipelined"],
                                       rows["dac_sharing"])

    def test_rerun_determinism(self, tmp_path):
        out1, out2 = tmp_path / "a", tmp_path / "b"
        for out in (out1, out2):
            assert run_cli("ablate", "--preset", "ddpm-toy", "--out", str(out)) == 0
        assert (out1 / "ablation.csv").read_bytes() == (out2 / "ablation.csv").read_bytes()


class TestDse:
    def test_two_point_space(self, tmp_path):
        space = tmp_path / "space.cfg"
        space.write_text("dse.y = 1,2\ndse.n = 8\ndse.k = 3\ndse.h = 2\n"
                         "dse.l = 6\ndse.m = 3\ndse.dac_sharing = 2\n")
        wl = tmp_path / "wl.json"
        wl.write_text(json.dumps({
            "name": "t", "timesteps": 1, "input_shape": [1, 4, 4],
            "layers": [{"kind": "conv", "out_channels": 2, "kernel": 3,
                        "stride": 1, "padding": 1}]}))
        assert run_cli("dse", "--workload", str(wl), "--space", str(space),
                       "--out", str(tmp_path)) == 0
        lines = (tmp_path / "dse_results.csv").read_text().splitlines()
        assert len(lines) == 3  # header + 2 points
        assert (tmp_path / "dse_frontier.csv").exists()

    def test_exclusion_reason_column(self, tmp_path):
        space = tmp_path / "space.cfg"
        space.write_text("dse.y = 1\ndse.n = 8,40\ndse.k = 3\ndse.h = 2\n"
                         "dse.l = 6\ndse.m = 3\ndse.dac_sharing = 2\n")
        wl = tmp_path / "wl.json"
        wl.write_text(json.dumps({
            "name": "t", "timesteps": 1, "input_shape": [1, 4, 4],
            "layers": [{"kind": "conv", "out_channels": 2, "kernel": 3,
                        "stride": 1, "padding": 1}]}))
        assert run_cli("dse", "--workload", str(wl), "--space", str(space),
                       "--out", str(tmp_path)) == 0
        lines = (tmp_path / "dse_results.csv").read_text().splitlines()
        assert lines[0].split(",")[8] == "reason"
        excluded = [line for line in lines[1:] if ",0," in line]
        assert excluded and "36-MR" in excluded[0]


class TestVerify:
    def test_single_preset_passes(self, capsys):
        assert run_cli("verify", "--preset", "ldm-toy", "--opts", "all") == 0
        out = capsys.readouterr().out
        assert "max rel err" in out and "[ok]" in out
