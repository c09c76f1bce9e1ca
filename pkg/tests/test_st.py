"""Single-machine reference semantics: reductions, blocks, stuck states."""

from wysx.lang import (
    Bool, Env, FfiInt, FfiList, FfiPair, OPAQUE, PrinSet, Sealed, ShareVal,
    TMsg, TScope, UNIT, VMap,
)
from wysx.sexp import parse
from wysx.st import DEFAULT_FUEL, Runtime, run

A = PrinSet.of("a")
B = PrinSet.of("b")
AB = PrinSet.of("a", "b")


def go(src, env=None, **kw):
    return run(parse(src), env=env, **kw)


def done(src, env=None, **kw):
    r = go(src, env, **kw)
    assert r.status == "done", (r.stuck_rule, r.stuck_reason)
    return r


def stuck(src, env=None, **kw):
    r = go(src, env, **kw)
    assert r.status == "stuck", r.status
    return r


def test_literals_and_arith():
    assert done("42").value == FfiInt(42)
    assert done("(ffi add 2 3)").value == FfiInt(5)
    assert done("(ffi sub 2 5)").value == FfiInt(-3)
    assert done("(ffi mul 6 7)").value == FfiInt(42)
    assert done("true").value == Bool(True)
    assert done('"hi"').value.s == "hi"


def test_let_if_app():
    assert done("(let x 3 (ffi add x x))").value == FfiInt(6)
    assert done("(if (ffi gt 3 2) 10 20)").value == FfiInt(10)
    assert done("(if false 10 20)").value == FfiInt(20)
    assert done("((lam x (ffi mul x x)) 9)").value == FfiInt(81)


def test_if_only_takes_booleans():
    r = stuck("(if 5 1 2)")
    assert r.stuck_rule == "if-branch"


def test_unbound_variable():
    r = stuck("(ffi add oops 1)")
    assert r.stuck_rule == "var"


def test_fix_factorial():
    src = "((fix f n (if (ffi eq n 0) 1 (ffi mul n (f (ffi sub n 1))))) 6)"
    assert done(src).value == FfiInt(720)


def test_fuel_runs_out():
    r = go("((fix f n (f n)) 0)", fuel=500)
    assert r.status == "fuel"
    assert r.steps == 500


def test_pairs_and_lists():
    assert done("(ffi fst (ffi pair 1 2))").value == FfiInt(1)
    assert done("(ffi snd (ffi pair 1 2))").value == FfiInt(2)
    r = done("(ffi cons 1 (list 2 3))")
    assert r.value == FfiList((FfiInt(1), FfiInt(2), FfiInt(3)))
    assert done("(ffi length (list 1 2 3))").value == FfiInt(3)
    assert done("(ffi is_nil (list))").value == Bool(True)
    assert done("(ffi hd (list 7 8))").value == FfiInt(7)
    assert done("(ffi tl (list 7 8))").value == FfiList((FfiInt(8),))


def test_ffi_errors_get_stuck():
    assert stuck("(ffi add 1)").stuck_rule == "ffi-apply"
    assert stuck("(ffi bogus 1)").stuck_rule == "ffi-apply"
    assert stuck("(ffi hd (list))").stuck_rule == "ffi-apply"
    assert stuck("(ffi add 1 true)").stuck_rule == "ffi-apply"


def test_ffi_refuses_placeholder_arguments():
    env = Env({"y": FfiPair(FfiInt(1), OPAQUE)})
    r = stuck("(ffi fst y)", env)
    assert r.stuck_rule == "ffi-apply"
    assert "OpaqueArg" in r.stuck_reason


# sealing and revealing

def test_seal_makes_sealed_value():
    assert done("(seal (prins a) 5)").value == Sealed(A, FfiInt(5))


def test_seal_outside_mode_is_stuck():
    r = stuck("(seal (prins a c) 5)")
    assert r.stuck_rule == "seal"


def test_reveal_in_par_needs_full_audience():
    env = Env({"xa": Sealed(A, FfiInt(5)), "xab": Sealed(AB, FfiInt(6))})
    assert done("(reveal xab)", env).value == FfiInt(6)
    assert stuck("(reveal xa)", env).stuck_rule == "reveal"
    # inside the owner's own block the audience matches
    r = done("(as_par (prins a) (lam _ (reveal xa)))", env)
    assert r.value == Sealed(A, FfiInt(5))


def test_reveal_in_sec_needs_a_member():
    env = Env({"xa": Sealed(A, FfiInt(5)), "xc": Sealed(PrinSet.of("c"), FfiInt(9))})
    r = done("(as_sec (prins a b) (lam _ (reveal xa)))", env)
    assert r.value == FfiInt(5)
    assert r.trace == (TMsg(FfiInt(5)),)
    assert stuck("(as_sec (prins a b) (lam _ (reveal xc)))", env).stuck_rule == "reveal"


def test_reveal_non_sealed_is_stuck():
    assert stuck("(reveal 5)").stuck_rule == "reveal"


# per-principal blocks

def test_as_par_wraps_and_scopes():
    r = done("(as_par (prins a) (lam _ (ffi add 1 2)))")
    assert r.value == Sealed(A, FfiInt(3))
    assert r.trace == (TScope(A, ()),)


def test_as_par_nested_scopes():
    r = done("(as_par (prins a) (lam _ (as_par (prins a) (lam _ 1))))")
    assert r.trace == (TScope(A, (TScope(A, ()),)),)
    assert r.value == Sealed(A, Sealed(A, FfiInt(1)))


def test_as_par_outside_mode_is_stuck():
    assert stuck("(as_par (prins a c) (lam _ 1))").stuck_rule == "par-enter"


def test_as_par_rejects_non_function():
    assert stuck("(as_par (prins a) 5)").stuck_rule == "par-enter"


def test_par_return_must_be_sealable():
    # a handle held by both parties cannot be boxed up for one of them
    env = Env({"x": ShareVal.of(AB, {"a": 1, "b": 2}, 32)})
    r = stuck("(as_par (prins a) (lam _ x))", env)
    assert r.stuck_rule == "par-return"


def test_par_inside_sec_is_stuck():
    r = stuck("(as_sec (prins a b) (lam _ (as_par (prins a) (lam _ 1))))")
    assert r.stuck_rule == "par-enter"


# joint blocks

def test_as_sec_publishes_result():
    r = done("(as_sec (prins a b) (lam _ (ffi add 20 22)))")
    assert r.value == FfiInt(42)
    assert r.trace == (TMsg(FfiInt(42)),)
    assert r.sec_entries == 1


def test_as_sec_requires_exact_party_set():
    assert stuck("(as_sec (prins a) (lam _ 1))").stuck_rule == "sec-enter"


def test_sec_inside_sec_is_stuck():
    r = stuck("(as_sec (prins a b) (lam _ (as_sec (prins a b) (lam _ 1))))")
    assert r.stuck_rule == "sec-enter"


def test_sec_entry_counter():
    src = """(let x (as_sec (prins a b) (lam _ 1))
              (let y (as_sec (prins a b) (lam _ 2))
               (ffi add x y)))"""
    r = done(src)
    assert r.value == FfiInt(3)
    assert r.sec_entries == 2
    assert r.trace == (TMsg(FfiInt(1)), TMsg(FfiInt(2)))


def test_empty_party_set_is_stuck():
    # the parser already refuses (prins), so build the term directly
    from wysx.lang import AsSec, AsPar, Const, Lam, PrinsVal, Var
    empty = Const(PrinsVal(PrinSet.of()))
    thunk = Lam("_", Const(FfiInt(1)))
    r = run(AsSec(empty, thunk))
    assert r.status == "stuck" and r.stuck_rule == "sec-ps"
    r = run(AsPar(empty, thunk))
    assert r.status == "stuck" and r.stuck_rule == "par-ps"


# maps

def test_mkmap_and_project_in_par():
    src = """(as_par (prins a) (lam _
               (project (prin a) (mkmap (prins a) (seal (prins a) 7)))))"""
    assert done(src).value == Sealed(A, FfiInt(7))


def test_mkmap_at_top_distributes_sealed_contents():
    r = done("(mkmap (prins a) (seal (prins a) 3))")
    assert r.value == VMap.of({"a": FfiInt(3)})


def test_mkmap_needs_sealed_argument_in_par():
    assert stuck("(mkmap (prins a) 3)").stuck_rule == "mkmap"


def test_mkmap_in_sec_takes_any_value():
    r = done("(as_sec (prins a b) (lam _ (mkmap (prins a) 7)))")
    assert r.trace == (TMsg(VMap.of({"a": FfiInt(7)})),)


def test_project_needs_singleton_mode():
    src = "(let m (mkmap (prins a) (seal (prins a) 7)) (project (prin a) m))"
    assert stuck(src).stuck_rule == "project"


def test_project_missing_entry():
    env = Env({"m": VMap.of({"b": FfiInt(1)})})
    r = stuck("(as_par (prins a) (lam _ (project (prin a) m)))", env)
    assert r.stuck_rule == "project"


def test_concat_merges_disjoint_maps():
    src = """(concat (mkmap (prins a) (seal (prins a) 1))
                     (mkmap (prins b) (seal (prins b) 2)))"""
    assert done(src).value == VMap.of({"a": FfiInt(1), "b": FfiInt(2)})


def test_concat_rejects_overlap():
    src = """(concat (mkmap (prins a) (seal (prins a) 1))
                     (mkmap (prins a) (seal (prins a) 2)))"""
    assert stuck(src).stuck_rule == "concat"


# share handles

def test_shares_only_inside_joint_blocks():
    r = stuck("(ffi mk_sh 5)")
    assert "ModeError" in r.stuck_reason
    env = Env({"h": ShareVal.of(AB, {"a": 1, "b": 2}, 32)})
    assert "ModeError" in stuck("(ffi comb_sh h)", env).stuck_reason


def test_share_mint_and_combine_round_trip():
    r = done("(as_sec (prins a b) (lam _ (ffi comb_sh (ffi mk_sh 5))))")
    assert r.value == FfiInt(5)


def test_share_words_xor_to_value():
    rt = Runtime(seed=3, width=8)
    r = run(parse("(as_sec (prins a b) (lam _ (ffi mk_sh 200)))"), rt=rt)
    assert r.status == "done"
    sh = r.value
    assert sh.ps == AB and sh.width == 8
    acc = 0
    for _, w in sh.words:
        assert 0 <= w < 256
        acc ^= w
    assert acc == 200


def test_share_mint_is_deterministic():
    src = "(as_sec (prins a b) (lam _ (ffi mk_sh 77)))"
    a = run(parse(src), rt=Runtime(seed=5)).value
    b = run(parse(src), rt=Runtime(seed=5)).value
    c = run(parse(src), rt=Runtime(seed=6)).value
    assert a == b
    assert a != c


def test_minted_values_reduce_to_signed_residue():
    rt = Runtime(width=4)
    r = run(parse("(as_sec (prins a b) (lam _ (ffi comb_sh (ffi mk_sh 200))))"), rt=rt)
    # 200 mod 16 = 8, and 8 reads as -8 in 4-bit two's complement
    assert r.value == FfiInt(-8)


# assorted whole programs

def test_two_party_pipeline():
    src = """(let xa (as_par (prins a) (lam _ 10))
              (let xb (as_par (prins b) (lam _ 4))
               (as_sec (prins a b) (lam _
                 (ffi sub (reveal xa) (reveal xb))))))"""
    r = done(src)
    assert r.value == FfiInt(6)
    assert r.trace == (TScope(A, ()), TScope(B, ()), TMsg(FfiInt(6)))


def test_default_fuel_is_generous():
    assert DEFAULT_FUEL >= 10 ** 5


def test_tuple_sugar_is_a_pair():
    r = done("(tuple 1 (tuple 2 3))")
    v = r.value
    assert v.fst == FfiInt(1)
    assert v.snd.fst == FfiInt(2)
    assert v.snd.snd == FfiInt(3)
