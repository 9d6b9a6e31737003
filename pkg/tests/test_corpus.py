import pytest

from urbanav.corpus import (
    CorpusFormatError,
    format_corpus,
    load_corpus,
    parse_corpus,
    save_corpus,
)
from urbanav.executor import execute, route_to_actions


def test_write_read_roundtrip_is_byte_identical(synth_small, tmp_path):
    _, corpus = synth_small
    path = tmp_path / "corpus.txt"
    save_corpus(corpus, path)
    first = path.read_bytes()
    again = load_corpus(path)
    save_corpus(again, path)
    assert path.read_bytes() == first


def test_parse_preserves_structure(synth_small):
    _, corpus = synth_small
    again = parse_corpus(format_corpus(corpus))
    assert len(again.paragraphs) == len(corpus.paragraphs)
    for p, q in zip(corpus.paragraphs, again.paragraphs):
        assert p.id == q.id and p.map_id == q.map_id and p.start == q.start
        for a, b in zip(p.instructions, q.instructions):
            assert a.text == b.text
            assert a.tokens == b.tokens
            assert a.abstract_tokens == b.abstract_tokens
            assert a.bindings == b.bindings
            assert a.start == b.start
            assert a.route == b.route
            assert a.actions == b.actions


def test_start_poses_chain(synth_small):
    _, corpus = synth_small
    for p in corpus.paragraphs:
        assert p.instructions[0].start == p.start
        for prev, nxt in zip(p.instructions, p.instructions[1:]):
            assert nxt.start == prev.route.final_pose


def test_gold_actions_roundtrip_through_executor(synth_small):
    maps, corpus = synth_small
    for p in corpus.paragraphs:
        grid = maps[p.map_id]
        for instr in p.instructions:
            route = execute(grid, instr.start, list(instr.actions))
            assert route.tiles == instr.route.tiles
            assert route.final_pose == instr.route.final_pose
            assert route_to_actions(grid, instr.start, route) == list(instr.actions)


def test_parse_rejects_bad_header():
    with pytest.raises(CorpusFormatError, match="CORPUS"):
        parse_corpus("PARAGRAPH x map=m start=(1,0,+1)\n")


def test_parse_rejects_missing_record():
    text = "CORPUS 1\nPARAGRAPH p map=m start=(1,0,+1)\nINSTRUCTION 0\nTEXT hi\n"
    with pytest.raises(CorpusFormatError, match="TOKENS"):
        parse_corpus(text)


def test_parse_rejects_bad_binding():
    text = (
        "CORPUS 1\nPARAGRAPH p map=m start=(1,0,+1)\nINSTRUCTION 0\nTEXT hi\n"
        "TOKENS hi\nABSTRACT hi\nBINDINGS <X>=abc\n"
        "ROUTE (0,0) final=(1,0,+1)\nACTIONS END\n"
    )
    with pytest.raises(CorpusFormatError, match="binding"):
        parse_corpus(text)


def test_parse_names_line_numbers():
    with pytest.raises(CorpusFormatError, match=":2"):
        parse_corpus("CORPUS 1\nGARBAGE\n")
