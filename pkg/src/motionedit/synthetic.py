"""Procedural motion families and edit operators for desk-scale triplets.

Every motion is rendered from a small parameter dict, so edits either
re-render with changed parameters (amplitude, direction) or transform the
rendered source directly (speed resampling, mirroring, trimming).
"""

from dataclasses import dataclass

import numpy as np

from .codec import DEFAULT_FPS, Motion, canonicalize, resample
from .dataset import EditTriplet
from .rotations import rot_x, rot_y, rot_z
from .skeleton import JOINT_NAMES, MIRROR_INDEX, NUM_BODY_JOINTS

FAMILIES = ("arm-raise", "squat", "walk-line", "walk-circle", "turn", "wave")
OPERATORS = ("amplitude", "speed", "mirror", "reverse", "trim")
VALID_OPERATORS = {
    "arm-raise": ("amplitude", "speed", "mirror", "trim"),
    "squat": ("amplitude", "speed", "trim"),
    "walk-line": ("amplitude", "speed", "reverse", "trim"),
    "walk-circle": ("amplitude", "speed", "mirror", "reverse", "trim"),
    "turn": ("amplitude", "speed", "mirror", "trim"),
    "wave": ("amplitude", "speed", "mirror", "trim"),
}
AMP_RANGE = (0.2, 1.3)
TEMPO_RANGE = (0.5, 2.5)
SPEED_FACTORS = (0.75, 1.5, 2.0)
AMP_DELTAS = (-0.4, -0.25, 0.25, 0.4)
MIRROR = np.diag([-1.0, 1.0, 1.0])

J = {name: i for i, name in enumerate(JOINT_NAMES)}

TEMPLATES = {
    ("amplitude", "up"): {
        "arm-raise": ["raise the arm {deg}higher", "lift your arm {deg}more", "go {deg}higher with the arm"],
        "squat": ["squat {deg}deeper", "go {deg}lower when squatting", "bend the knees {deg}more"],
        "walk-line": ["take {deg}longer steps", "use {deg}bigger strides", "step {deg}further each time"],
        "walk-circle": ["take {deg}longer steps", "make {deg}bigger strides around", "step {deg}further while circling"],
        "turn": ["turn {deg}further", "rotate {deg}more", "keep turning {deg}longer"],
        "wave": ["wave {deg}bigger", "swing the hand {deg}more when waving", "make the wave {deg}wider"],
    },
    ("amplitude", "down"): {
        "arm-raise": ["raise the arm {deg}less high", "lift the arm {deg}less", "keep the arm {deg}lower"],
        "squat": ["squat {deg}less deep", "go {deg}less low", "bend the knees {deg}less"],
        "walk-line": ["take {deg}shorter steps", "use {deg}smaller strides", "step {deg}less far"],
        "walk-circle": ["take {deg}shorter steps", "make {deg}smaller strides around", "step {deg}less while circling"],
        "turn": ["turn {deg}less", "rotate {deg}less far", "stop turning {deg}sooner"],
        "wave": ["wave {deg}smaller", "swing the hand {deg}less when waving", "make the wave {deg}narrower"],
    },
    ("speed", "up"): ["{deg}faster", "do it {deg}faster", "go {deg}quicker"],
    ("speed", "down"): ["{deg}slower", "move {deg}slower", "do it {deg}more slowly"],
    ("mirror", None): {
        "arm-raise": ["use the other arm", "mirror", "do it with the opposite arm"],
        "wave": ["wave with the other hand", "mirror", "use the opposite hand"],
        "walk-circle": ["circle the other way", "mirror", "go around in the opposite direction"],
        "turn": ["turn the other way", "mirror", "rotate to the opposite side"],
    },
    ("reverse", None): ["walk backwards instead", "go in the opposite direction backwards", "reverse the walking direction"],
    ("trim", "end"): ["stop earlier", "end the motion sooner", "cut the ending short"],
    ("trim", "start"): ["start later", "skip the beginning", "begin from the middle"],
}


def template_vocabulary():
    """Every edit text the generator can emit."""
    out = set()
    for (op, flavor), tmpl in TEMPLATES.items():
        rows = tmpl.values() if isinstance(tmpl, dict) else [tmpl]
        for row in rows:
            for t in row:
                for deg in ("", "a bit ", "much "):
                    out.add(_clean(t.format(deg=deg)))
    return out


def _clean(text):
    return " ".join(text.split())


def _smooth(u):
    u = np.clip(u, 0.0, 1.0)
    return u * u * (3 - 2 * u)


def _identity_pose(n):
    return np.tile(np.eye(3), (n, NUM_BODY_JOINTS, 1, 1))


def _set(pose, joint, R):
    pose[:, J[joint] - 1] = R


def _relaxed_arms(pose, drop=np.radians(75)):
    # rest pose is a T-pose; bring both arms down to the sides
    _set(pose, "left_shoulder", rot_y(-drop) * np.ones((pose.shape[0], 1, 1)))
    _set(pose, "right_shoulder", rot_y(drop) * np.ones((pose.shape[0], 1, 1)))


def render(params, n_frames=None, fps=DEFAULT_FPS):
    """Render the parametric family motion described by ``params`` (canonical)."""
    n = int(n_frames or params["n_frames"])
    t = np.arange(n) / fps
    fam = params["family"]
    amp, tempo = params["amp"], params["tempo"]
    side = 1.0 if params.get("side", "left") == "left" else -1.0
    direction = float(params.get("direction", 1))
    phase = params.get("phase", 0.0)
    pose = _identity_pose(n)
    _relaxed_arms(pose)
    trans = np.zeros((n, 3))
    heading = np.zeros(n)
    lean = params.get("lean", 0.0)
    _set(pose, "spine1", rot_x(np.full(n, lean)))
    _set(pose, "head", rot_z(np.full(n, params.get("look", 0.0))))

    if fam == "arm-raise":
        s = (1 - np.cos(2 * np.pi * 0.5 * tempo * t + phase)) / 2
        lift = np.radians(75) - amp * np.radians(140) * s
        joint = "left_shoulder" if side > 0 else "right_shoulder"
        sign = -1.0 if side > 0 else 1.0
        _set(pose, joint, rot_y(sign * lift))
        _set(pose, joint.replace("shoulder", "elbow"), rot_z(-sign * np.radians(20) * s))
    elif fam == "squat":
        s = (1 - np.cos(2 * np.pi * 0.5 * tempo * t + phase)) / 2
        alpha = amp * np.radians(80) * s
        for hip, knee, ankle in (("left_hip", "left_knee", "left_ankle"), ("right_hip", "right_knee", "right_ankle")):
            _set(pose, hip, rot_x(alpha))
            _set(pose, knee, rot_x(-2 * alpha))
            _set(pose, ankle, rot_x(alpha))
        _set(pose, "spine1", rot_x(lean + 0.6 * alpha))
        _set(pose, "left_shoulder", rot_x(0.8 * alpha) @ rot_y(-np.radians(75)))
        _set(pose, "right_shoulder", rot_x(0.8 * alpha) @ rot_y(np.radians(75)))
        trans[:, 2] = -(0.39 + 0.40) * (1 - np.cos(alpha))
    elif fam in ("walk-line", "walk-circle"):
        freq = 0.9 * tempo
        swing = np.sin(2 * np.pi * freq * t + phase)
        hip = np.radians(25) * amp * swing * direction
        _set(pose, "left_hip", rot_x(hip))
        _set(pose, "right_hip", rot_x(-hip))
        _set(pose, "left_knee", rot_x(-np.radians(30) * amp * np.maximum(0, -swing)))
        _set(pose, "right_knee", rot_x(-np.radians(30) * amp * np.maximum(0, swing)))
        _set(pose, "left_shoulder", rot_x(-0.8 * hip) @ rot_y(-np.radians(75)))
        _set(pose, "right_shoulder", rot_x(0.8 * hip) @ rot_y(np.radians(75)))
        speed = direction * 1.1 * amp * tempo  # m/s along the facing direction
        if fam == "walk-line":
            trans[:, 1] = speed * t
        else:
            omega = side * params.get("turn_rate", 0.8) * tempo
            heading = omega * t
            # integrate velocity ``speed`` along the heading
            trans[:, 0] = -speed / omega * (1 - np.cos(heading))
            trans[:, 1] = speed / omega * np.sin(heading)
        trans[:, 2] = 0.02 * amp * np.abs(swing)
    elif fam == "turn":
        total = side * amp * np.pi
        dur = n / fps
        heading = total * _smooth(tempo * t / max(dur * 0.8, 1e-6))
        step = np.radians(12) * np.sin(2 * np.pi * 1.2 * tempo * t + phase) * (heading != heading[-1])
        _set(pose, "left_hip", rot_x(step))
        _set(pose, "right_hip", rot_x(-step))
    elif fam == "wave":
        joint = "left_shoulder" if side > 0 else "right_shoulder"
        sign = -1.0 if side > 0 else 1.0
        _set(pose, joint, rot_y(sign * np.radians(-30)))
        osc = np.radians(40) * amp * np.sin(2 * np.pi * 1.2 * tempo * t + phase)
        _set(pose, joint.replace("shoulder", "elbow"), rot_y(sign * (np.radians(-70) + osc)))
    else:
        raise ValueError(f"unknown family {fam!r}")

    return canonicalize(Motion(trans, rot_z(heading), pose, fps))


def mirror_motion(m):
    """Reflect across the sagittal (x = 0) plane and swap left/right joints."""
    pose = MIRROR @ m.body_pose @ MIRROR
    idx = [MIRROR_INDEX[j + 1] - 1 for j in range(NUM_BODY_JOINTS)]
    return Motion(m.root_trans @ MIRROR, MIRROR @ m.root_orient @ MIRROR, pose[:, idx], m.fps)


def describe(params):
    """Deterministic natural-language description of a rendered motion."""
    fam = params["family"]
    amp, tempo = params["amp"], params["tempo"]
    side = params.get("side", "left")
    tempo_w = "slowly" if tempo < 0.85 else "quickly" if tempo > 1.35 else "at a steady pace"
    level = 0 if amp < 0.5 else 1 if amp < 0.85 else 2
    length = " briefly" if params.get("trimmed") else ""
    if fam == "arm-raise":
        body = f"raises the {side} arm " + ("a little", "to shoulder height", "high above the head")[level]
    elif fam == "squat":
        body = "does a " + ("shallow", "half", "deep")[level] + " squat"
    elif fam == "walk-line":
        way = "forward" if params.get("direction", 1) > 0 else "backward"
        body = f"walks {way} with " + ("small steps", "normal steps", "long strides")[level]
    elif fam == "walk-circle":
        way = "" if params.get("direction", 1) > 0 else " backward"
        body = f"walks{way} in a circle to the {side} with " + ("small steps", "normal steps", "long strides")[level]
    elif fam == "turn":
        body = "turns " + ("a little", "a quarter", "around")[level] + f" to the {side}"
    else:
        body = f"waves the {side} hand " + ("gently", "normally", "energetically")[level]
    return f"a person {body} {tempo_w}{length}"


def sample_params(family, rng, fps=DEFAULT_FPS):
    return {
        "family": family,
        "amp": float(rng.uniform(0.35, 1.0)),
        "tempo": float(rng.uniform(0.8, 1.3)),
        "side": str(rng.choice(["left", "right"])),
        "direction": 1,
        "phase": float(rng.uniform(-0.3, 0.3)),
        "lean": float(rng.uniform(-0.1, 0.15)),
        "look": float(rng.uniform(-0.3, 0.3)),
        "turn_rate": float(rng.uniform(0.6, 1.0)),
        "n_frames": int(rng.integers(40, 57)),
        "trimmed": False,
    }


@dataclass
class SyntheticEditSpec:
    family: str
    operator: str
    magnitude: float
    flavor: str = None
    template: int = 0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        if self.operator not in VALID_OPERATORS[self.family]:
            raise ValueError(f"operator {self.operator!r} is not valid for {self.family!r}")

    def text(self):
        key = (self.operator, self.flavor)
        tmpl = TEMPLATES[key]
        if isinstance(tmpl, dict):
            tmpl = tmpl[self.family]
        deg = ""
        if self.operator == "amplitude":
            deg = "much " if abs(self.magnitude) >= 0.4 else "a bit "
        elif self.operator == "speed":
            deg = "much " if self.magnitude >= 2.0 else ""
        return _clean(tmpl[self.template % len(tmpl)].format(deg=deg))


def apply_edit(edit, params, source):
    """Return (target_motion, target_params) for an edit of ``source``."""
    p = dict(params)
    if edit.operator == "amplitude":
        p["amp"] = float(np.clip(params["amp"] * (1 + edit.magnitude), *AMP_RANGE))
        target = source if edit.magnitude == 0 else render(p, fps=source.fps)
    elif edit.operator == "speed":
        p["tempo"] = params["tempo"] * edit.magnitude
        target = resample(source, edit.magnitude)
        p["n_frames"] = target.num_frames
    elif edit.operator == "mirror":
        p["side"] = "right" if params["side"] == "left" else "left"
        target = mirror_motion(source)
    elif edit.operator == "reverse":
        p["direction"] = -params.get("direction", 1)
        target = render(p, fps=source.fps)
    elif edit.operator == "trim":
        keep = max(2, int(round(source.num_frames * (1 - edit.magnitude))))
        p["trimmed"] = True
        p["n_frames"] = keep
        if edit.flavor == "end":
            target = source.slice(0, keep)
        else:
            target = source.slice(source.num_frames - keep, source.num_frames)
    else:
        raise ValueError(edit.operator)
    return canonicalize(target), p


def random_edit(family, rng):
    op = str(rng.choice(VALID_OPERATORS[family]))
    flavor = None
    if op == "amplitude":
        mag = float(rng.choice(AMP_DELTAS))
        flavor = "up" if mag > 0 else "down"
    elif op == "speed":
        mag = float(rng.choice(SPEED_FACTORS))
        flavor = "up" if mag > 1 else "down"
    elif op == "trim":
        mag = float(rng.uniform(0.3, 0.45))
        flavor = str(rng.choice(["end", "start"]))
    else:
        mag = 1.0
    return SyntheticEditSpec(family, op, mag, flavor, int(rng.integers(3)))


def generate_synthetic_triplets(n, families=FAMILIES, seed=0, fps=DEFAULT_FPS):
    """``n`` edit triplets; deterministic in ``seed``."""
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n):
        fam = str(rng.choice(list(families)))
        params = sample_params(fam, rng, fps)
        edit = random_edit(fam, rng)
        source = render(params, fps=fps)
        target, tparams = apply_edit(edit, params, source)
        meta = {
            "family": fam, "operator": edit.operator, "magnitude": edit.magnitude, "flavor": edit.flavor,
            "source_text": describe(params), "target_text": describe(tparams),
            "source_params": params, "target_params": tparams,
        }
        out.append(EditTriplet(f"syn{seed}_{i:05d}", source, target, edit.text(), "train", "synthetic", meta))
    return out


def generate_long_motions(n, duration=10.0, families=FAMILIES, seed=0, fps=DEFAULT_FPS):
    """Long single-family motions used as mining input; returns (ids, motions, params)."""
    rng = np.random.default_rng(seed)
    ids, motions, params = [], [], []
    for i in range(n):
        fam = str(rng.choice(list(families)))
        p = sample_params(fam, rng, fps)
        p["n_frames"] = int(round(duration * fps))
        ids.append(f"long{seed}_{i:04d}")
        motions.append(render(p, fps=fps))
        params.append(p)
    return ids, motions, params
