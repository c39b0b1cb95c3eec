import json

import numpy as np
import pytest

from basts.checkpoint import deserialize, load_checkpoint, serialize
from basts.cli import (
    CorpusRecord,
    FormatError,
    RunConfig,
    dedupe_against,
    load_corpus,
    preprocess,
    run,
)
from basts.summarizer import Vocab
from basts.syntax_encoder import ConfigError, SepModel, TreeLstmParams
from conftest import IDLE_CONNECTIONS_SOURCE


def write_corpus(path, rows):
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row) + "\n")


def toy_rows():
    return [
        {"id": "m1", "code": "int add(int a, int b) { return a + b; }",
         "comment": "Adds two numbers."},
        {"id": "m2", "code": "void reset(Counter c) { c.set(0); }",
         "comment": "Resets the counter."},
        {"id": "m3",
         "code": "int max(int a, int b) { if (a > b) { return a; } return b; }",
         "comment": "Returns the larger value."},
    ]


class TestLoadCorpus:
    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.jsonl"
        path.write_text("")
        assert load_corpus(path) == []

    def test_three_records_in_order(self, tmp_path):
        path = tmp_path / "c.jsonl"
        write_corpus(path, toy_rows())
        records = load_corpus(path)
        assert [r.record_id for r in records] == ["m1", "m2", "m3"]

    def test_missing_comment_names_line(self, tmp_path):
        path = tmp_path / "c.jsonl"
        path.write_text('{"id": "a", "code": "void f() { }"}\n')
        with pytest.raises(FormatError) as err:
            load_corpus(path)
        assert err.value.line == 1

    def test_duplicate_id_rejected(self, tmp_path):
        path = tmp_path / "c.jsonl"
        rows = toy_rows()
        rows[1]["id"] = "m1"
        write_corpus(path, rows)
        with pytest.raises(FormatError) as err:
            load_corpus(path)
        assert err.value.line == 2

    def test_missing_file_raises_io(self, tmp_path):
        with pytest.raises(OSError):
            load_corpus(tmp_path / "nope.jsonl")


class TestRunConfig:
    def test_defaults_validate(self):
        config = RunConfig().validate()
        assert config.embedding_size == 64
        assert config.max_code_length == 100
        assert config.max_comment_length == 30

    def test_from_file(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text(
            "# toy setup\nembedding_size = 16\nheads = 2\n"
            "learning_rate = 0.01\nfreeze_pretrained = true\n"
        )
        config = RunConfig.from_file(path)
        assert config.embedding_size == 16
        assert config.heads == 2
        assert config.learning_rate == 0.01
        assert config.freeze_pretrained is True

    def test_rejects_indivisible_heads(self):
        with pytest.raises(ConfigError):
            RunConfig(embedding_size=10, heads=4).validate()

    def test_rejects_unknown_key(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("emedding_size = 16\n")
        with pytest.raises(FormatError):
            RunConfig.from_file(path)


class TestPreprocess:
    def toy_config(self):
        return RunConfig(embedding_size=16, heads=2, encoder_layers=1,
                         decoder_layers=1, epochs=2)

    def test_straight_line_gives_one_split(self):
        records = [CorpusRecord("r", "int f(int a) { return a; }", "identity")]
        corpus = preprocess(records, self.toy_config())
        (example,) = corpus.examples
        assert len(example.split_asts) == 1
        assert example.comment_ids[0] == Vocab.BOS
        assert example.comment_ids[-1] == Vocab.EOS

    def test_idle_method_gives_six_split_asts(self):
        records = [CorpusRecord("idle", IDLE_CONNECTIONS_SOURCE, "closes idle connections")]
        corpus = preprocess(records, self.toy_config())
        assert len(corpus.examples[0].split_asts) == 6

    def test_unparseable_record_dropped_and_counted(self):
        records = [
            CorpusRecord("bad", "int f( { return; }", "broken"),
            CorpusRecord("ok", "void g() { a = 1; }", "fine"),
        ]
        corpus = preprocess(records, self.toy_config())
        assert len(corpus.examples) == 1
        assert len(corpus.dropped) == 1
        assert corpus.dropped[0][0] == "bad"

    def test_truncation_limits(self):
        long_code = "void f() { " + " ".join(f"x{i} = {i};" for i in range(200)) + " }"
        long_comment = " ".join(f"w{i}" for i in range(60))
        config = self.toy_config()
        corpus = preprocess([CorpusRecord("r", long_code, long_comment)], config)
        assert len(corpus.examples[0].code_ids) <= config.max_code_length
        assert len(corpus.examples[0].comment_ids) <= config.max_comment_length + 2

    def test_vocab_leakage_guard(self):
        config = self.toy_config()
        train = preprocess(
            [CorpusRecord("t", "void f() { alpha = 1; }", "does alpha things")],
            config,
        )
        before = list(train.code_vocab.id_to_token)
        test_corpus = preprocess(
            [CorpusRecord("e", "void g() { zeta = 2; }", "does zeta things")],
            config,
            code_vocab=train.code_vocab,
            word_vocab=train.word_vocab,
        )
        assert test_corpus.code_vocab.id_to_token == before
        assert "zeta" not in test_corpus.code_vocab.token_to_id
        unk_positions = [
            i for i, t in enumerate(test_corpus.examples[0].code_ids)
            if t == Vocab.UNK
        ]
        assert unk_positions, "unseen identifiers map to UNK"

    def test_empty_surviving_corpus_fails(self):
        with pytest.raises(ConfigError):
            preprocess([CorpusRecord("bad", "???", "x")], self.toy_config())

    def test_dedupe_against_training(self):
        config = self.toy_config()
        shared = "int add(int a, int b) { return a + b; }"
        train = preprocess([CorpusRecord("t", shared, "adds")], config)
        test_corpus = preprocess(
            [
                CorpusRecord("dup", shared, "adds again"),
                CorpusRecord("new", "int sub(int a, int b) { return a - b; }",
                             "subtracts"),
            ],
            config,
            code_vocab=train.code_vocab,
            word_vocab=train.word_vocab,
        )
        deduped = dedupe_against(test_corpus, train.records)
        assert [r.record_id for r in deduped.records] == ["new"]
        assert ("dup", "duplicate of a training record") in deduped.dropped


class TestCheckpointFormat:
    def test_tree_roundtrip_bytes_identical(self):
        params = TreeLstmParams.init(
            {"<UNK>": 0, "A": 1}, 8, np.random.default_rng(3)
        )
        sep = SepModel.init(params, np.random.default_rng(4))
        raw = serialize(tree=params, sep=sep)
        restored = deserialize(raw)
        assert restored.tree.vocab == params.vocab
        for (name, a), (_, b) in zip(
            restored.tree.named_params(), params.named_params()
        ):
            assert np.array_equal(a.data, b.data), name
        assert np.array_equal(restored.sep.score_w.data, sep.score_w.data)
        assert serialize(tree=restored.tree, sep=restored.sep) == raw

    def test_checksum_detects_corruption(self):
        params = TreeLstmParams.init({"<UNK>": 0}, 4, np.random.default_rng(0))
        raw = bytearray(serialize(tree=params))
        raw[30] ^= 0xFF
        from basts.checkpoint import CheckpointError

        with pytest.raises(CheckpointError):
            deserialize(bytes(raw))


def _write_toy_setup(tmp_path, epochs=3):
    corpus_path = tmp_path / "train.jsonl"
    write_corpus(corpus_path, toy_rows())
    config_path = tmp_path / "toy.cfg"
    config_path.write_text(
        "embedding_size = 16\nheads = 2\nencoder_layers = 1\n"
        f"decoder_layers = 1\nbatch_size = 4\nepochs = {epochs}\n"
        "learning_rate = 0.003\n"
    )
    return corpus_path, config_path


class TestCliCommands:
    def test_split_reports_six_splits_and_five_edges(self, tmp_path, capsys):
        src = tmp_path / "idle.mini"
        src.write_text(IDLE_CONNECTIONS_SOURCE)
        assert run(["split", "--input", str(src)]) == 0
        payload = json.loads(capsys.readouterr().out)
        (method,) = payload["methods"]
        assert method["method"] == "closeIdleConnections"
        assert len(method["splits"]) == 6
        assert len(method["edges"]) == 5
        assert method["splits"][0]["code"].startswith("void closeIdleConnections")
        assert method["splits"][0]["ast"]["type"] == "MethodDeclaration"

    def test_cfg_and_dom_dump(self, tmp_path, capsys):
        src = tmp_path / "m.mini"
        src.write_text("void f() { if (c) { a = 1; } b = 2; }")
        assert run(["cfg", "dump", "--input", str(src)]) == 0
        assert "digraph cfg" in capsys.readouterr().out
        assert run(["dom", "dump", "--input", str(src)]) == 0
        assert "digraph domtree" in capsys.readouterr().out

    def test_eval_identity_files_score_100(self, tmp_path, capsys):
        hyp = tmp_path / "hyp.txt"
        ref = tmp_path / "ref.txt"
        text = "closes idle connections\nreturns the larger value\n"
        hyp.write_text(text)
        ref.write_text(text)
        json_path = tmp_path / "report.json"
        assert run([
            "eval", "--hyp", str(hyp), "--ref", str(ref), "--json", str(json_path),
        ]) == 0
        out = capsys.readouterr().out
        assert "S-BLEU    100.00" in out
        report = json.loads(json_path.read_text())
        for key in ("s_bleu", "c_bleu", "rouge1_f", "rouge2_f", "rougeL_f"):
            assert report[key] == 100.0

    def test_pretrain_train_summarize_pipeline(self, tmp_path, capsys):
        corpus_path, config_path = _write_toy_setup(tmp_path)
        sep_path = tmp_path / "sep.ckpt"
        model_path = tmp_path / "model.ckpt"
        assert run([
            "pretrain", "--config", str(config_path), "--input", str(corpus_path),
            "--output", str(sep_path), "--log", str(tmp_path / "p.csv"),
        ]) == 0
        assert sep_path.exists()
        assert run([
            "train", "--config", str(config_path), "--input", str(corpus_path),
            "--checkpoint", str(sep_path), "--output", str(model_path),
            "--log", str(tmp_path / "t.csv"),
        ]) == 0
        ckpt = load_checkpoint(model_path)
        assert ckpt.tree is not None and ckpt.transformer is not None
        capsys.readouterr()

        src = tmp_path / "one.mini"
        src.write_text("int add(int a, int b) { return a + b; }")
        assert run([
            "summarize", "--config", str(config_path), "--input", str(src),
            "--checkpoint", str(model_path),
        ]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert len(lines) == 1  # one output line per method, possibly empty

    def test_eval_corpus_mode(self, tmp_path, capsys):
        corpus_path, config_path = _write_toy_setup(tmp_path)
        model_path = tmp_path / "model.ckpt"
        assert run([
            "train", "--config", str(config_path), "--input", str(corpus_path),
            "--from-scratch", "--output", str(model_path),
            "--log", str(tmp_path / "t.csv"),
        ]) == 0
        capsys.readouterr()
        assert run([
            "eval", "--config", str(config_path), "--input", str(corpus_path),
            "--checkpoint", str(model_path),
        ]) == 0
        out = capsys.readouterr().out
        assert "S-BLEU" in out and "ROUGE-L" in out

    def test_train_determinism_bit_identical(self, tmp_path, capsys):
        corpus_path, config_path = _write_toy_setup(tmp_path, epochs=2)
        outputs = []
        for tag in ("a", "b"):
            model_path = tmp_path / f"model_{tag}.ckpt"
            log_path = tmp_path / f"loss_{tag}.csv"
            assert run([
                "train", "--config", str(config_path), "--input", str(corpus_path),
                "--from-scratch", "--output", str(model_path),
                "--log", str(log_path), "--seed", "11",
            ]) == 0
            outputs.append((model_path.read_bytes(), log_path.read_text()))
        capsys.readouterr()
        assert outputs[0][0] == outputs[1][0]
        assert outputs[0][1] == outputs[1][1]

    def test_train_without_checkpoint_or_scratch_fails(self, tmp_path, capsys):
        corpus_path, config_path = _write_toy_setup(tmp_path)
        with pytest.raises(ConfigError):
            run([
                "train", "--config", str(config_path), "--input", str(corpus_path),
                "--output", str(tmp_path / "m.ckpt"), "--log", str(tmp_path / "l.csv"),
            ])
