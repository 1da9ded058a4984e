"""Synthetic episode generation, augmentation, persistence, splits."""

import json
import math

import numpy as np
import pytest

from aeronav.dataset import (
    AttentionMask,
    AugmentConfig,
    DialogRound,
    DialogStyle,
    Episode,
    GenerationError,
    GeneratorConfig,
    Observation,
    augment,
    compass_name,
    episode_to_dict,
    generate_corpus,
    generate_episode,
    goal_overlap_mask,
    load_episodes,
    patch_polygon,
    phrase_bank_words,
    quantized_turn,
    rasterize_observation,
    save_episodes,
    split_dataset,
)
from aeronav.geometry import AREA_EPS, ViewArea, intersection_area, iou, view_polygon


# ----------------------------------------------------------------- generator

def test_same_seed_same_bytes():
    a = generate_episode(3)
    b = generate_episode(3)
    assert a == b
    assert json.dumps(episode_to_dict(a)) == json.dumps(episode_to_dict(b))


def test_different_seeds_differ():
    assert generate_episode(1) != generate_episode(2)


def test_generated_episode_obeys_schema_invariants():
    for seed in range(12):
        ep = generate_episode(seed)
        assert len(ep.dialog) <= ep.max_steps
        assert len(ep.gt_attention) == len(ep.gt_trajectory)
        assert ep.gt_trajectory.views[0] == ep.start_view
        assert ep.start_view.rotation == pytest.approx(
            ep.start_direction % (2 * math.pi))
        # demonstration ends exactly on the goal
        assert iou(ep.gt_trajectory.final, ep.goal) == 1.0
        # every hop is flyable in one step
        views = ep.gt_trajectory.views
        for prev, nxt in zip(views, views[1:]):
            hop = math.hypot(nxt.center_x - prev.center_x,
                             nxt.center_y - prev.center_y)
            assert hop <= 12.0 + 1e-9


def test_first_round_has_no_question_later_rounds_do():
    ep = generate_episode(5)
    assert ep.dialog[0].question is None
    for rnd in ep.dialog[1:]:
        assert rnd.question


def test_goal_on_start_degenerates_to_single_view():
    cfg = GeneratorConfig(goal_distance=(0.0, 0.0))
    ep = generate_episode(9, cfg)
    assert len(ep.gt_trajectory) == 1
    assert ep.goal == ep.start_view
    assert ep.gt_attention[0].array.sum() > 0
    assert len(ep.dialog) == 1


def test_unreachable_config_is_rejected_up_front():
    with pytest.raises(ValueError):
        GeneratorConfig(goal_distance=(30.0, 40.0))   # > step_max * max_steps


def test_retry_bound_error_mentions_limit():
    # a world barely larger than the view makes goal placement hopeless
    cfg = GeneratorConfig(world_side=16.0, view_side=10.0,
                          goal_distance=(13.2, 20.4), max_retries=5)
    with pytest.raises(GenerationError, match="5"):
        generate_episode(0, cfg)


def test_style_marginals_over_corpus():
    episodes = generate_corpus(0, 1000)
    texts = [r.instruction for ep in episodes for r in ep.dialog]
    assert len(texts) == 2000
    from aeronav.dataset import COMPASS_16
    ego = sum(1 for t in texts
              if "turn" in t or "straight" in t)
    allo = sum(1 for t in texts
               if any(c in t.split() for c in COMPASS_16))
    ego_frac = ego / len(texts)
    allo_frac = allo / len(texts)
    assert 0.78 <= ego_frac <= 0.86, ego_frac
    assert 0.26 <= allo_frac <= 0.34, allo_frac


def test_style_field_matches_text():
    for ep in generate_corpus(50, 40):
        for rnd in ep.dialog:
            has_ego = "turn" in rnd.instruction or "straight" in rnd.instruction
            words = rnd.instruction.split()
            from aeronav.dataset import COMPASS_16
            has_allo = any(c in words for c in COMPASS_16)
            if rnd.style is DialogStyle.EGOCENTRIC:
                assert has_ego and not has_allo
            elif rnd.style is DialogStyle.ALLOCENTRIC:
                assert has_allo and not has_ego
            else:
                assert has_ego and has_allo


def test_every_emitted_word_is_in_the_phrase_bank():
    bank = set(phrase_bank_words())
    for ep in generate_corpus(200, 60):
        for rnd in ep.dialog:
            for word in rnd.instruction.split():
                assert word in bank, word
            if rnd.question:
                for word in rnd.question.split():
                    assert word in bank, word


# ---------------------------------------------------------- attention masks

def test_masks_are_zero_without_goal_overlap():
    for seed in (0, 4, 8):
        ep = generate_episode(seed)
        goal_poly = view_polygon(ep.goal)
        for view, mask in zip(ep.gt_trajectory.views, ep.gt_attention):
            p = mask.size
            for i in range(p):
                for j in range(p):
                    inter = intersection_area(
                        patch_polygon(view, p, i, j), goal_poly)
                    if inter <= AREA_EPS:
                        assert mask.grid[i][j] == 0.0
                    else:
                        assert mask.grid[i][j] == 1.0


def test_final_view_mask_is_all_ones():
    ep = generate_episode(2)
    assert ep.gt_attention[-1].array.min() == 1.0


def test_patch_polygons_tile_the_view():
    v = ViewArea(30.0, 40.0, 8.0, 1.1)
    total = sum(patch_polygon(v, 4, i, j).area
                for i in range(4) for j in range(4))
    assert total == pytest.approx(v.area, rel=1e-12)
    with pytest.raises(ValueError):
        patch_polygon(v, 4, 4, 0)


def test_patch_rows_run_from_far_edge_when_facing_north():
    # facing +y: patch (0, 0) must be the north-west corner cell
    v = ViewArea(50.0, 50.0, 8.0, math.pi / 2.0)
    nw = patch_polygon(v, 4, 0, 0)
    xs = [p[0] for p in nw.vertices]
    ys = [p[1] for p in nw.vertices]
    assert max(xs) == pytest.approx(48.0)   # west half
    assert min(ys) == pytest.approx(52.0)   # north edge band


def test_goal_overlap_mask_centered():
    v = ViewArea(50.0, 50.0, 8.0)
    m = goal_overlap_mask(v, ViewArea(50.0, 50.0, 2.0), 4)
    arr = m.array
    assert arr[1:3, 1:3].min() == 1.0       # the four central cells
    assert arr.sum() == 4.0                  # and nothing else


def test_attention_mask_validation():
    with pytest.raises(ValueError):
        AttentionMask(((0.0, 1.5), (0.0, 0.0)))
    with pytest.raises(ValueError):
        AttentionMask(((0.0, 1.0), (0.0,)))


# -------------------------------------------------------------- observations

def test_rasterize_observation_is_deterministic_and_oriented():
    v = ViewArea(40.0, 60.0, 10.0, 0.9)
    a = rasterize_observation(123, v)
    b = rasterize_observation(123, v)
    assert np.array_equal(a.pixels, b.pixels)
    assert a.direction == (math.cos(v.rotation), math.sin(v.rotation))
    assert a.resolution == 16


def test_observation_half_turn_equivalence():
    v = ViewArea(40.0, 60.0, 10.0, 1.3)
    w = ViewArea(40.0, 60.0, 10.0, 1.3 + math.pi)
    a = rasterize_observation(77, v).pixels
    b = rasterize_observation(77, w).pixels
    assert np.allclose(a, b[::-1, ::-1], atol=1e-9)


def test_observation_outside_world_rejected():
    with pytest.raises(ValueError):
        rasterize_observation(1, ViewArea(1.0, 1.0, 10.0))


def test_observation_validation():
    with pytest.raises(ValueError):
        Observation(pixels=np.zeros((4, 4)), direction=(0.9, 0.0))
    with pytest.raises(ValueError):
        Observation(pixels=np.full((4, 4), 1.5), direction=(1.0, 0.0))


# ----------------------------------------------------------------- language

def test_compass_names():
    assert compass_name(0.0) == "east"
    assert compass_name(math.pi / 2) == "north"
    assert compass_name(math.pi) == "west"
    assert compass_name(-math.pi / 2) == "south"
    assert compass_name(math.pi / 4) == "northeast"
    assert compass_name(math.radians(22.5)) == "east-northeast"


def test_quantized_turn():
    assert quantized_turn(0.0, math.radians(30.0)) == 30
    assert quantized_turn(0.0, math.radians(-45.0)) == -45
    assert quantized_turn(0.0, math.radians(4.0)) == 0
    assert quantized_turn(0.0, math.pi) == 180
    assert quantized_turn(0.0, -math.pi) == 180
    assert quantized_turn(math.radians(350.0), math.radians(10.0)) == 15	# wraps


# -------------------------------------------------------------- augmentation

def _sample():
    rng = np.random.default_rng(0)
    pixels = rng.uniform(0.0, 1.0, (16, 16))
    obs = Observation(pixels=pixels, direction=(1.0, 0.0))
    grid = np.zeros((4, 4))
    grid[0, 3] = 1.0                       # goal marked far-right
    mask = AttentionMask(tuple(tuple(r) for r in grid.tolist()))
    return obs, mask, (3.0, 7.0)


def test_flip_twice_restores_sample():
    obs, mask, wp = _sample()
    cfg = AugmentConfig(p_blur=0.0, p_noise=0.0, p_hflip=1.0, p_vflip=0.0)
    once = augment(obs, mask, wp, cfg, seed=5)
    twice = augment(*once, cfg, seed=5)
    assert np.array_equal(twice[0].pixels, obs.pixels)
    assert twice[1] == mask
    assert twice[2] == wp


def test_hflip_moves_marked_patch_and_waypoint_to_mirror():
    obs, mask, wp = _sample()
    cfg = AugmentConfig(p_blur=0.0, p_noise=0.0, p_hflip=1.0, p_vflip=0.0)
    fobs, fmask, fwp = augment(obs, mask, wp, cfg, seed=1)
    assert fmask.grid[0][0] == 1.0 and fmask.grid[0][3] == 0.0
    assert fwp == (-3.0, 7.0)
    assert np.array_equal(fobs.pixels, obs.pixels[:, ::-1])


def test_vflip_moves_marked_patch_and_waypoint_to_mirror():
    obs, mask, wp = _sample()
    cfg = AugmentConfig(p_blur=0.0, p_noise=0.0, p_hflip=0.0, p_vflip=1.0)
    fobs, fmask, fwp = augment(obs, mask, wp, cfg, seed=1)
    assert fmask.grid[3][3] == 1.0 and fmask.grid[0][3] == 0.0
    assert fwp == (3.0, -7.0)
    assert np.array_equal(fobs.pixels, obs.pixels[::-1, :])


def test_blur_fixes_constant_images():
    obs = Observation(pixels=np.full((8, 8), 0.37), direction=(0.0, 1.0))
    mask = AttentionMask(((0.0,),))
    cfg = AugmentConfig(p_blur=1.0, p_noise=0.0, p_hflip=0.0, p_vflip=0.0)
    blurred, _, _ = augment(obs, mask, (0.0, 0.0), cfg, seed=0)
    assert np.allclose(blurred.pixels, 0.37, atol=1e-15)


def test_blur_smooths_variance():
    obs, mask, wp = _sample()
    cfg = AugmentConfig(p_blur=1.0, p_noise=0.0, p_hflip=0.0, p_vflip=0.0)
    blurred, _, _ = augment(obs, mask, wp, cfg, seed=0)
    assert blurred.pixels.var() < obs.pixels.var()


def test_noise_bound_and_clamp():
    obs, mask, wp = _sample()
    cfg = AugmentConfig(p_blur=0.0, p_noise=1.0, noise_eps=0.1,
                        p_hflip=0.0, p_vflip=0.0)
    noisy, _, _ = augment(obs, mask, wp, cfg, seed=3)
    assert np.max(np.abs(noisy.pixels - obs.pixels)) <= 0.1 + 1e-12
    assert noisy.pixels.min() >= 0.0 and noisy.pixels.max() <= 1.0


def test_augment_deterministic_per_seed():
    obs, mask, wp = _sample()
    cfg = AugmentConfig()
    a = augment(obs, mask, wp, cfg, seed=9)
    b = augment(obs, mask, wp, cfg, seed=9)
    assert np.array_equal(a[0].pixels, b[0].pixels)
    assert a[1] == b[1] and a[2] == b[2]


# --------------------------------------------------------------- persistence

def test_round_trip_identity(tmp_path):
    eps = generate_corpus(0, 10)
    path = tmp_path / "episodes.jsonl"
    save_episodes(eps, path)
    again = load_episodes(path)
    assert again == eps


def test_empty_file_loads_empty(tmp_path):
    path = tmp_path / "none.jsonl"
    path.write_text("")
    assert load_episodes(path) == []


def test_missing_field_error_names_line_and_field(tmp_path):
    ep = generate_episode(0)
    rec = episode_to_dict(ep)
    del rec["goal"]
    path = tmp_path / "bad.jsonl"
    good = json.dumps(episode_to_dict(ep))
    path.write_text(good + "\n" + json.dumps(rec) + "\n")
    with pytest.raises(ValueError, match=r"line 2.*goal"):
        load_episodes(path)


def test_malformed_json_error_names_line(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text(json.dumps(episode_to_dict(generate_episode(0)))
                    + "\n{not json\n")
    with pytest.raises(ValueError, match="line 2"):
        load_episodes(path)


def test_wrong_schema_version_rejected(tmp_path):
    rec = episode_to_dict(generate_episode(0))
    rec["schema_version"] = 99
    path = tmp_path / "v99.jsonl"
    path.write_text(json.dumps(rec) + "\n")
    with pytest.raises(ValueError, match="schema_version"):
        load_episodes(path)


# -------------------------------------------------------------------- splits

def test_split_sizes_8_1_1():
    eps = generate_corpus(0, 10)
    a, b, c = split_dataset(eps, (0.8, 0.1, 0.1), seed=1)
    assert (len(a), len(b), len(c)) == (8, 1, 1)


def test_split_deterministic_disjoint_union():
    eps = generate_corpus(0, 17)
    a1, b1, c1 = split_dataset(eps, (0.6, 0.2, 0.2), seed=4)
    a2, b2, c2 = split_dataset(eps, (0.6, 0.2, 0.2), seed=4)
    assert a1 == a2 and b1 == b2 and c1 == c2
    ids = [e.id for e in a1 + b1 + c1]
    assert sorted(ids) == sorted(e.id for e in eps)
    assert len(set(ids)) == len(ids)


def test_split_rejects_too_few():
    eps = generate_corpus(0, 2)
    with pytest.raises(ValueError):
        split_dataset(eps, (0.8, 0.1, 0.1), seed=0)


def test_split_rejects_bad_ratios():
    eps = generate_corpus(0, 6)
    with pytest.raises(ValueError):
        split_dataset(eps, (0.5, 0.4, 0.2), seed=0)
    with pytest.raises(ValueError):
        split_dataset(eps, (1.0, 0.0, 0.0), seed=0)


def test_every_split_gets_an_episode():
    eps = generate_corpus(0, 4)
    a, b, c = split_dataset(eps, (0.9, 0.05, 0.05), seed=0)
    assert len(a) >= 1 and len(b) >= 1 and len(c) >= 1
    assert len(a) + len(b) + len(c) == 4


# ------------------------------------------------------------------- schema

def test_dialog_round_validation():
    with pytest.raises(ValueError):
        DialogRound(instruction="  ")
    r = DialogRound(instruction="go north", style="allocentric")
    assert r.style is DialogStyle.ALLOCENTRIC


def test_episode_rejects_inconsistent_records():
    ep = generate_episode(1)
    with pytest.raises(ValueError):
        Episode(**{**ep.__dict__, "gt_attention": ep.gt_attention[:-1]})
    with pytest.raises(ValueError):
        Episode(**{**ep.__dict__, "max_steps": 0})
    far = ViewArea(500.0, 500.0, 10.0)
    with pytest.raises(ValueError):
        Episode(**{**ep.__dict__, "goal": far})
