"""Snapshot model, tree I/O, and the minimal line differ."""

import difflib
import random

import pytest
from hypothesis import given, strategies as st

from micropass.errors import TreeError
from micropass.snapshot import (
    DiffResidual,
    Snapshot,
    _myers_opcodes,
    diff_snapshots,
    load_tree,
    render_patch,
    split_lines,
    write_tree,
)


def lcs_len(a, b):
    """Independent O(nm) LCS oracle."""
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b):
            cur.append(prev[j] + 1 if x == y else max(prev[j + 1], cur[j]))
        prev = cur
    return prev[-1]


class TestSnapshotModel:
    def test_empty(self):
        snap = Snapshot({})
        assert len(snap) == 0
        assert snap.paths == []

    def test_paths_sorted_and_bytes_preserved(self):
        snap = Snapshot({"b.txt": b"2", "a/x.c": b"int x;\n"})
        assert snap.paths == ["a/x.c", "b.txt"]
        assert snap["a/x.c"] == b"int x;\n"

    def test_id_independent_of_insertion_order(self):
        s1 = Snapshot({"a": b"1", "b": b"2"})
        s2 = Snapshot({"b": b"2", "a": b"1"})
        assert s1.id == s2.id
        assert s1 == s2

    def test_id_changes_with_content(self):
        assert Snapshot({"a": b"1"}).id != Snapshot({"a": b"2"}).id
        assert Snapshot({"a": b"1"}).id != Snapshot({"b": b"1"}).id

    @pytest.mark.parametrize("path", ["/abs", "a//b", "./a", "a/../b", "a\\b", "", "a/."])
    def test_bad_paths_rejected(self, path):
        with pytest.raises(TreeError):
            Snapshot({path: b""})

    def test_with_changes_is_persistent(self):
        s1 = Snapshot({"a": b"1", "b": b"2"})
        s2 = s1.with_changes({"a": b"9", "b": None, "c": b"3"})
        assert s1.files == {"a": b"1", "b": b"2"}
        assert s2.files == {"a": b"9", "c": b"3"}


class TestTreeIO:
    def test_load_empty_dir(self, tmp_path):
        assert len(load_tree(tmp_path)) == 0

    def test_load_single_file(self, tmp_path):
        (tmp_path / "a").mkdir()
        (tmp_path / "a" / "b.c").write_bytes(b"int x;\n")
        snap = load_tree(tmp_path)
        assert snap.paths == ["a/b.c"]
        assert snap["a/b.c"] == b"int x;\n"

    def test_round_trip(self, tmp_path):
        snap = Snapshot({
            "src/main.c": b"int main(void) { return 0; }\n",
            "README": b"hello\n",
            "data/blob.bin": bytes(range(256)),
        })
        write_tree(snap, tmp_path / "out")
        assert load_tree(tmp_path / "out") == snap

    def test_ignore_globs_default(self, tmp_path):
        (tmp_path / ".git").mkdir()
        (tmp_path / ".git" / "HEAD").write_bytes(b"ref\n")
        (tmp_path / "journal").mkdir()
        (tmp_path / "journal" / "header.json").write_bytes(b"{}\n")
        (tmp_path / "kept.txt").write_bytes(b"x\n")
        assert load_tree(tmp_path).paths == ["kept.txt"]

    def test_symlink_skipped_with_warning(self, tmp_path, caplog):
        (tmp_path / "real.txt").write_bytes(b"x\n")
        (tmp_path / "link.txt").symlink_to(tmp_path / "real.txt")
        with caplog.at_level("WARNING", logger="micropass.snapshot"):
            snap = load_tree(tmp_path)
        assert snap.paths == ["real.txt"]
        assert any("link.txt" in rec.message for rec in caplog.records)

    def test_write_refuses_non_empty(self, tmp_path):
        (tmp_path / "stale").write_bytes(b"")
        with pytest.raises(TreeError):
            write_tree(Snapshot({"a": b"1"}), tmp_path)
        write_tree(Snapshot({"a": b"1"}), tmp_path, overwrite=True)
        assert (tmp_path / "a").read_bytes() == b"1"

    def test_missing_root(self, tmp_path):
        with pytest.raises(TreeError):
            load_tree(tmp_path / "nope")


class TestMyersDiff:
    def test_identical(self):
        assert _myers_opcodes(["a\n"], ["a\n"]) == [("equal", 0, 1, 0, 1)]

    def test_empty_both(self):
        assert _myers_opcodes([], []) == []

    def test_pure_insert_delete(self):
        assert _myers_opcodes([], ["x\n"]) == [("insert", 0, 0, 0, 1)]
        assert _myers_opcodes(["x\n"], []) == [("delete", 0, 1, 0, 0)]

    def test_opcode_ranges_cover_inputs(self):
        a, b = list("abcabba"), list("cbabac")
        ops = _myers_opcodes(a, b)
        assert ops[0][1] == 0 and ops[0][3] == 0
        assert ops[-1][2] == len(a) and ops[-1][4] == len(b)
        for (t1, _, i2, _, j2), (t2, i1, _, j1, _) in zip(ops, ops[1:]):
            assert i2 == i1 and j2 == j1

    def test_minimality_against_lcs_oracle(self):
        rng = random.Random(42)
        for _ in range(300):
            na, nb = rng.randint(0, 14), rng.randint(0, 14)
            a = [rng.choice("abcd") for _ in range(na)]
            b = [rng.choice("abcd") for _ in range(nb)]
            ops = _myers_opcodes(a, b)
            dels = sum(i2 - i1 for t, i1, i2, _, _ in ops if t in ("delete", "replace"))
            ins = sum(j2 - j1 for t, _, _, j1, j2 in ops if t in ("insert", "replace"))
            want = (len(a) - lcs_len(a, b)) + (len(b) - lcs_len(a, b))
            assert dels + ins == want, (a, b, ops)
            # reconstruct b from a through the opcodes
            rebuilt = []
            for t, i1, i2, j1, j2 in ops:
                rebuilt.extend(a[i1:i2] if t == "equal" else b[j1:j2])
            assert rebuilt == b

    @given(st.lists(st.sampled_from("ab\n x"), max_size=30),
           st.lists(st.sampled_from("ab\n x"), max_size=30))
    def test_reconstruction_property(self, a, b):
        ops = _myers_opcodes(a, b)
        rebuilt = []
        for t, i1, i2, j1, j2 in ops:
            rebuilt.extend(a[i1:i2] if t == "equal" else b[j1:j2])
        assert rebuilt == b


class TestDiffSnapshots:
    def test_equal_snapshots_empty_residual(self):
        s = Snapshot({"x.txt": b"a\n", "y.txt": b"b\n"})
        res = diff_snapshots(s, s)
        assert res.is_empty and res.changed_lines == 0

    def test_single_line_change(self):
        # oracle: `diff -u` over a\n vs b\n reports one removal plus one addition
        a = Snapshot({"x.txt": b"a\n"})
        b = Snapshot({"x.txt": b"b\n"})
        res = diff_snapshots(a, b)
        assert len(res.entries) == 1
        assert res.entries[0].status == "modified"
        assert res.changed_lines == 2

    def test_changed_lines_zero_iff_empty(self):
        cases = [
            (Snapshot({}), Snapshot({})),
            (Snapshot({"a": b"x\n"}), Snapshot({"a": b"x\n"})),
            (Snapshot({"a": b"x\n"}), Snapshot({"a": b"y\n"})),
            (Snapshot({"a": b"x\n"}), Snapshot({})),
            (Snapshot({}), Snapshot({"a": b""})),  # empty added file: no entry
        ]
        for a, b in cases:
            res = diff_snapshots(a, b)
            assert (res.changed_lines == 0) == res.is_empty

    def test_added_and_removed_status(self):
        a = Snapshot({"gone.txt": b"1\n2\n"})
        b = Snapshot({"new.txt": b"3\n"})
        res = diff_snapshots(a, b)
        assert [(e.path, e.status) for e in res.entries] == [
            ("gone.txt", "removed"), ("new.txt", "added")]
        assert res.changed_lines == 3

    def test_swap_symmetry(self):
        a = Snapshot({"m.txt": b"1\n2\n3\n4\n", "only_a.txt": b"z\n"})
        b = Snapshot({"m.txt": b"1\nX\n3\n4\n", "only_b.txt": b"w\n"})
        fwd = diff_snapshots(a, b)
        rev = diff_snapshots(b, a)
        flip = {"added": "removed", "removed": "added", "modified": "modified"}
        assert [(e.path, flip[e.status]) for e in fwd.entries] == \
               [(e.path, e.status) for e in rev.entries]
        assert fwd.changed_lines == rev.changed_lines
        for ef, er in zip(fwd.entries, rev.entries):
            for hf, hr in zip(ef.hunks, er.hunks):
                assert (hf.old_start, hf.old_len) == (hr.new_start, hr.new_len)
                assert (hf.new_start, hf.new_len) == (hr.old_start, hr.old_len)
                assert hf.added == hr.removed and hf.removed == hr.added

    def test_hunk_matches_difflib_for_simple_case(self):
        old = "".join(f"line{i}\n" for i in range(10))
        new = old.replace("line4\n", "LINE4\n")
        a, b = Snapshot({"f": old.encode()}), Snapshot({"f": new.encode()})
        entry = diff_snapshots(a, b).entries[0]
        expected = list(difflib.unified_diff(
            split_lines(old), split_lines(new), n=3, lineterm="\n"))[2:]
        got = [ln for h in entry.hunks for ln in (h.header() + "\n",) + h.lines]
        assert got == [ln if ln.endswith("\n") else ln for ln in expected]

    def test_no_trailing_newline_marker(self):
        a = Snapshot({"f": b"x\n"})
        b = Snapshot({"f": b"x"})
        patch = render_patch(diff_snapshots(a, b))
        assert "\\ No newline at end of file" in patch

    def test_render_patch_prefixes(self):
        a = Snapshot({"old.txt": b"1\n"})
        b = Snapshot({"new.txt": b"2\n"})
        patch = render_patch(diff_snapshots(a, b))
        assert "--- a/old.txt" in patch and "+++ /dev/null" in patch
        assert "--- /dev/null" in patch and "+++ b/new.txt" in patch

    def test_binary_content_diffable(self):
        a = Snapshot({"bin": bytes([0xFF, 0xFE, 0x0A, 0x41])})
        b = Snapshot({"bin": bytes([0xFF, 0x00, 0x0A, 0x42])})
        res = diff_snapshots(a, b)
        assert res.changed_lines > 0


class TestResidualInvariant:
    @given(st.dictionaries(st.sampled_from(["a", "b", "c"]),
                           st.binary(max_size=12), max_size=3),
           st.dictionaries(st.sampled_from(["a", "b", "c"]),
                           st.binary(max_size=12), max_size=3))
    def test_zero_iff_empty_property(self, fa, fb):
        res = diff_snapshots(Snapshot(fa), Snapshot(fb))
        assert (res.changed_lines == 0) == res.is_empty
        assert isinstance(res, DiffResidual)
