"""Archive round-trips, byte determinism, and corruption errors."""

import numpy as np
import pytest

from cn3.archive import (ArchiveError, FORMAT_VERSION, MAGIC, load_archive,
                         save_archive)
from cn3.data import CLASSIFICATION, TAGGING, LabeledExample
from cn3.model import Cn3Model, ModelConfig
from cn3.synthetic import case_tagging, keyword_classification


def small_model(task="classify", **overrides):
    base = dict(task=task, layers=1, d_word=4, d_h=4, d_a=3, d_char=3,
                d_pos=2, d_pos_tag=2, d_spell=2, d_rel=2, lstm_hidden=3,
                max_len=16, seed=1)
    base.update(overrides)
    cfg = ModelConfig(**base)
    if task == "tag":
        data = case_tagging(n_train=6, n_test=1, seed=0)[0]
    else:
        data = keyword_classification(n=6, seed=0)
    return Cn3Model(cfg, data), data


class TestRoundTrip:
    def test_forward_outputs_bitwise_equal(self, tmp_path):
        m, data = small_model(use_lstm=True, use_spell=True, use_char=True)
        path = tmp_path / "m.cn3"
        save_archive(m, str(path))
        loaded = load_archive(str(path))
        for ex in data:
            assert loaded.loss_for(ex).item() == m.loss_for(ex).item()
            assert loaded.predict(ex) == m.predict(ex)

    def test_tag_task_round_trip(self, tmp_path):
        m, data = small_model(task="tag", use_spell=True)
        path = tmp_path / "m.cn3"
        save_archive(m, str(path))
        loaded = load_archive(str(path))
        assert loaded.labels == m.labels
        assert loaded.predict(data[0]) == m.predict(data[0])

    def test_vocab_and_config_survive(self, tmp_path):
        m, _ = small_model()
        path = tmp_path / "m.cn3"
        save_archive(m, str(path))
        loaded = load_archive(str(path))
        assert loaded.cfg == m.cfg
        assert loaded.word_vocab.items == m.word_vocab.items
        assert loaded.char_vocab.items == m.char_vocab.items

    def test_frozen_word_table_survives(self, tmp_path):
        m, data = small_model(fine_tune_words=False)
        assert "tables.word" not in dict(m.params())
        path = tmp_path / "m.cn3"
        save_archive(m, str(path))
        loaded = load_archive(str(path))
        np.testing.assert_array_equal(loaded.encoder.word_table.weights.data,
                                      m.encoder.word_table.weights.data)
        assert loaded.loss_for(data[0]).item() == m.loss_for(data[0]).item()

    def test_mutation_then_save_round_trips(self, tmp_path):
        m, data = small_model()
        for _, t in m.params():
            t.data += 0.25
        path = tmp_path / "m.cn3"
        save_archive(m, str(path))
        loaded = load_archive(str(path))
        assert loaded.loss_for(data[0]).item() == m.loss_for(data[0]).item()


class TestDeterminism:
    def test_same_model_same_bytes(self, tmp_path):
        m1, _ = small_model(use_lstm=True)
        m2, _ = small_model(use_lstm=True)
        p1, p2 = tmp_path / "a.cn3", tmp_path / "b.cn3"
        save_archive(m1, str(p1))
        save_archive(m2, str(p2))
        assert p1.read_bytes() == p2.read_bytes()

    def test_different_seed_different_bytes(self, tmp_path):
        m1, _ = small_model(seed=1)
        m2, _ = small_model(seed=2)
        p1, p2 = tmp_path / "a.cn3", tmp_path / "b.cn3"
        save_archive(m1, str(p1))
        save_archive(m2, str(p2))
        assert p1.read_bytes() != p2.read_bytes()


class TestCorruption:
    def test_bad_magic(self, tmp_path):
        p = tmp_path / "x.cn3"
        p.write_bytes(b"NOTANARCHIVE" + b"\x00" * 32)
        with pytest.raises(ArchiveError, match="magic"):
            load_archive(str(p))

    def test_truncated_tensor_block(self, tmp_path):
        m, _ = small_model()
        p = tmp_path / "m.cn3"
        save_archive(m, str(p))
        blob = p.read_bytes()
        p.write_bytes(blob[:-16])
        with pytest.raises(ArchiveError, match="truncated"):
            load_archive(str(p))

    def test_trailing_garbage(self, tmp_path):
        m, _ = small_model()
        p = tmp_path / "m.cn3"
        save_archive(m, str(p))
        p.write_bytes(p.read_bytes() + b"\x00" * 8)
        with pytest.raises(ArchiveError, match="trailing"):
            load_archive(str(p))

    def test_version_mismatch(self, tmp_path):
        m, _ = small_model()
        p = tmp_path / "m.cn3"
        save_archive(m, str(p))
        blob = bytearray(p.read_bytes())
        # bump the version digit inside the JSON header
        idx = blob.find(b'"version":' + str(FORMAT_VERSION).encode())
        assert idx > 0
        blob[idx + len(b'"version":')] = ord("9")
        p.write_bytes(bytes(blob))
        with pytest.raises(ArchiveError, match="version"):
            load_archive(str(p))

    def test_magic_prefix_present(self, tmp_path):
        m, _ = small_model()
        p = tmp_path / "m.cn3"
        save_archive(m, str(p))
        assert p.read_bytes().startswith(MAGIC)
