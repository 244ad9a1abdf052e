import json
from collections import Counter

import pytest

from sarclass.corpus import (Commit, Dataset, Label, Task, apply_filters, ingest_git_log,
                             load_dataset, parse_csv, parse_jsonl, save_dataset,
                             stratified_kfold, stratified_sample)
from sarclass.errors import DataError

MSG = "Refactor createOrUpdate method in MongoChannelStore to extract methods"


def _balanced(counts: dict[Label, int], task: Task) -> Dataset:
    commits = []
    for lab, n in counts.items():
        commits += [Commit(f"{lab.value}-{i}", f"message number {i}", lab) for i in range(n)]
    return Dataset(task, commits)


def test_jsonl_single_record_infers_binary():
    d = parse_jsonl(json.dumps({"id": "c1", "message": MSG, "label": "SAR"}) + "\n")
    assert len(d) == 1 and d.task is Task.BINARY and d[0].label is Label.SAR


def test_empty_file_with_header():
    d = parse_jsonl('{"task": "multiclass"}\n')
    assert len(d) == 0 and d.task is Task.MULTICLASS


def test_mixed_task_labels_rejected():
    lines = [{"id": "a", "message": "x", "label": "CODE_SMELL"},
             {"id": "b", "message": "y", "label": "SAR"},
             {"id": "c", "message": "z"}]
    with pytest.raises(DataError, match="mixed task labels"):
        parse_jsonl("\n".join(map(json.dumps, lines)))


def test_malformed_line_reports_line_number():
    with pytest.raises(DataError, match="line 2"):
        parse_jsonl('{"id": "a", "message": "x"}\n{not json\n')


def test_unknown_label_and_duplicate_id():
    with pytest.raises(DataError, match="unknown label"):
        parse_jsonl('{"id": "a", "message": "x", "label": "MAYBE"}')
    with pytest.raises(DataError, match="duplicate id"):
        parse_jsonl('{"id": "a", "message": "x"}\n{"id": "a", "message": "y"}')


def test_message_stored_verbatim_and_order_kept(tmp_path):
    raw = "  Fix\tthing \n second line "
    d = Dataset(Task.BINARY, [Commit("b", raw, Label.SAR), Commit("a", "other", None)])
    path = tmp_path / "d.jsonl"
    save_dataset(d, path)
    back = load_dataset(path)
    assert back.messages == [raw, "other"] and [c.id for c in back] == ["b", "a"]
    assert back.to_jsonl() == d.to_jsonl()


def test_csv_roundtrip():
    d = parse_csv('id,message,label\nx1,"Move class, rename",SAR\nx2,bump version,NON_SAR\n')
    assert d.task is Task.BINARY and d[0].message == "Move class, rename"


def test_git_log_examples():
    d = ingest_git_log("abc\x1ffix typo\x00")
    assert len(d) == 1 and d[0].id == "abc" and d[0].label is None and d.task is None
    assert len(ingest_git_log("")) == 0
    with pytest.raises(DataError, match="record 2"):
        ingest_git_log("abc\x1ffix\x00def no separator\x00")


def test_git_log_bad_bytes_replaced(caplog):
    d = ingest_git_log(b"abc\x1ffix \xff typo\x00")
    assert "�" in d[0].message
    assert "non-UTF-8" in caplog.text


def test_git_log_truncated():
    with pytest.raises(DataError, match="truncated"):
        ingest_git_log("abc\x1ffix\x00def\x1fhalf")


def test_filters():
    d = Dataset(Task.BINARY, [Commit("1", "merged", Label.SAR), Commit("2", MSG, Label.SAR),
                              Commit("3", "", Label.NON_SAR), Commit("4", "   ", Label.NON_SAR),
                              Commit("5", "re-factor it", Label.SAR)])
    out = apply_filters(d)
    assert [c.id for c in out.kept] == ["2", "5"]
    assert [(c.id, r) for c, r in out.rejected] == [("1", "TOO_SHORT"), ("3", "EMPTY"),
                                                     ("4", "EMPTY")]
    assert len(out.kept) + len(out.rejected) == len(d)


def test_stratified_sample_examples():
    d = _balanced({Label.SAR: 912, Label.NON_SAR: 911}, Task.BINARY)
    s = stratified_sample(d, 911, 3)
    assert s.class_counts() == {Label.SAR: 911, Label.NON_SAR: 911}
    pos = {c.id: i for i, c in enumerate(d)}
    assert [pos[c.id] for c in s] == sorted(pos[c.id] for c in s)
    assert len(stratified_sample(d, 0, 3)) == 0
    assert stratified_sample(d, 500, 3).to_jsonl() == stratified_sample(d, 500, 3).to_jsonl()


def test_stratified_sample_starvation_names_all_classes():
    d = _balanced({lab: 348 for lab in Task.MULTICLASS.labels}, Task.MULTICLASS)
    with pytest.raises(DataError) as e:
        stratified_sample(d, 349, 0)
    for lab in Task.MULTICLASS.labels:
        assert lab.value in str(e.value)


def test_kfold_binary_sizes():
    d = _balanced({Label.SAR: 912, Label.NON_SAR: 911}, Task.BINARY)
    folds = stratified_kfold(d, 10, 1)
    assert {len(f) for f in folds} <= {182, 183}
    for lab in (Label.SAR, Label.NON_SAR):
        per = [sum(d[i].label is lab for i in f) for f in folds]
        assert max(per) - min(per) <= 1


def test_kfold_multiclass_sizes():
    d = _balanced({lab: 348 for lab in Task.MULTICLASS.labels}, Task.MULTICLASS)
    for f in stratified_kfold(d, 10, 5):
        assert set(Counter(d[i].label for i in f).values()) <= {34, 35}


def test_kfold_two_folds_of_four():
    d = _balanced({Label.SAR: 2, Label.NON_SAR: 2}, Task.BINARY)
    folds = stratified_kfold(d, 2, 0)
    assert [len(f) for f in folds] == [2, 2]
    assert all({d[i].label for i in f} == {Label.SAR, Label.NON_SAR} for f in folds)


def test_kfold_too_many_folds():
    d = _balanced({Label.SAR: 9, Label.NON_SAR: 20}, Task.BINARY)
    with pytest.raises(DataError, match="exceeds"):
        stratified_kfold(d, 10, 0)
