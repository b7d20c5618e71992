"""Numba-compiled geometry and simulation kernels.

Everything here operates on plain float64 arrays so the hot episode loop
stays allocation-free. The public modules (`world`, `robot`, `controllers`,
`fitness`) wrap these kernels; tests check them against independent
brute-force oracles.
"""

import math

import numpy as np
from numba import njit

TWO_PI = 2.0 * math.pi

# Below this, wheel turn rates are treated as straight-line motion.
OMEGA_EPS = 1e-9
# Below this, a ray and a segment are treated as parallel (no hit).
PARALLEL_EPS = 1e-12


@njit(cache=True)
def norm_angle(a):
    """Normalize an angle to (-pi, pi]."""
    return math.pi - (math.pi - a) % TWO_PI


@njit(cache=True)
def ray_min_dist(walls, ox, oy, dx, dy, max_range):
    """Distance along ray (ox,oy)+(dx,dy)*t to the nearest wall, -1.0 if none.

    walls is an (n, 4) array of segments (x1, y1, x2, y2); (dx, dy) must be
    a unit vector. Hits farther than max_range are ignored.
    """
    best = -1.0
    for i in range(walls.shape[0]):
        ex = walls[i, 2] - walls[i, 0]
        ey = walls[i, 3] - walls[i, 1]
        fx = walls[i, 0] - ox
        fy = walls[i, 1] - oy
        den = dx * ey - dy * ex
        if abs(den) < PARALLEL_EPS:
            continue
        t = (ey * fx - ex * fy) / den
        s = (dy * fx - dx * fy) / den
        if t >= 0.0 and 0.0 <= s <= 1.0 and t <= max_range:
            if best < 0.0 or t < best:
                best = t
    return best


@njit(cache=True)
def point_seg_dist(px, py, x1, y1, x2, y2):
    """Euclidean distance from a point to a segment."""
    ex = x2 - x1
    ey = y2 - y1
    ll = ex * ex + ey * ey
    if ll <= 0.0:
        dx = px - x1
        dy = py - y1
        return math.sqrt(dx * dx + dy * dy)
    t = ((px - x1) * ex + (py - y1) * ey) / ll
    if t < 0.0:
        t = 0.0
    elif t > 1.0:
        t = 1.0
    dx = px - (x1 + t * ex)
    dy = py - (y1 + t * ey)
    return math.sqrt(dx * dx + dy * dy)


@njit(cache=True)
def min_wall_dist(walls, px, py):
    """Distance from a point to the nearest wall segment."""
    best = np.inf
    for i in range(walls.shape[0]):
        d = point_seg_dist(px, py, walls[i, 0], walls[i, 1], walls[i, 2], walls[i, 3])
        if d < best:
            best = d
    return best


@njit(cache=True)
def step_kinematics(x, y, h, wl, wr, wheel_radius, axle_length, dt, speed_limit):
    """One exact unicycle arc update; returns the new (x, y, heading).

    Wheel speeds are clamped to [-speed_limit, speed_limit]. Straight motion
    keeps the heading bit-exact; arc motion renormalizes it to (-pi, pi].
    """
    if wl > speed_limit:
        wl = speed_limit
    elif wl < -speed_limit:
        wl = -speed_limit
    if wr > speed_limit:
        wr = speed_limit
    elif wr < -speed_limit:
        wr = -speed_limit
    v = wheel_radius * (wl + wr) / 2.0
    w = wheel_radius * (wr - wl) / axle_length
    if abs(w) < OMEGA_EPS:
        x += v * dt * math.cos(h)
        y += v * dt * math.sin(h)
        return x, y, h
    r = v / w
    h2 = h + w * dt
    x += r * (math.sin(h2) - math.sin(h))
    y -= r * (math.cos(h2) - math.cos(h))
    return x, y, norm_angle(h2)


@njit(cache=True)
def read_sensors(walls, targets, remaining, x, y, h, body_radius,
                 ir_range, ir_half_span, target_range, target_half_span,
                 sensor_headings, out):
    """Fill `out` (16,) with sensor activations at pose (x, y, h).

    Slots 0..7 are the obstacle (IR) sensors, 8..15 the paired target
    sensors. Each IR sensor casts three rays (axis and axis +- half span)
    from its periphery mount point; activation is linear in the nearest
    hit distance, 1 at the periphery and 0 at max range or beyond.
    Target sensors respond to the nearest remaining target inside their
    cone; walls do not occlude targets.
    """
    nt = targets.shape[0]
    for i in range(sensor_headings.shape[0]):
        phi = h + sensor_headings[i]
        cp = math.cos(phi)
        sp = math.sin(phi)
        px = x + body_radius * cp
        py = y + body_radius * sp
        dmin = -1.0
        for k in range(3):
            a = phi + (k - 1) * ir_half_span
            d = ray_min_dist(walls, px, py, math.cos(a), math.sin(a), ir_range)
            if d >= 0.0 and (dmin < 0.0 or d < dmin):
                dmin = d
        if dmin < 0.0:
            out[i] = 0.0
        else:
            act = 1.0 - dmin / ir_range
            if act < 0.0:
                act = 0.0
            elif act > 1.0:
                act = 1.0
            out[i] = act
        tbest = -1.0
        for t in range(nt):
            if not remaining[t]:
                continue
            vx = targets[t, 0] - px
            vy = targets[t, 1] - py
            d = math.sqrt(vx * vx + vy * vy)
            if d > target_range:
                continue
            if d >= 1e-12:
                diff = norm_angle(math.atan2(vy, vx) - phi)
                if abs(diff) > target_half_span:
                    continue
            if tbest < 0.0 or d < tbest:
                tbest = d
        if tbest < 0.0:
            out[8 + i] = 0.0
        else:
            act = 1.0 - tbest / target_range
            if act < 0.0:
                act = 0.0
            elif act > 1.0:
                act = 1.0
            out[8 + i] = act


@njit(cache=True)
def winner_index(kohonen, s):
    """Index of the Kohonen row nearest to s (squared Euclidean, ties -> lowest)."""
    best = np.inf
    bi = 0
    for i in range(kohonen.shape[0]):
        acc = 0.0
        for j in range(kohonen.shape[1]):
            d = s[j] - kohonen[i, j]
            acc += d * d
        if acc < best:
            best = acc
            bi = i
    return bi


@njit(cache=True)
def shifted_sigmoid(raw, slope):
    """Sigmoid squashed into the wheel-command range (-0.5, 0.5)."""
    return 1.0 / (1.0 + math.exp(-slope * raw)) - 0.5


@njit(cache=True)
def cpn_commands(kohonen, grossberg, slope, s):
    """Counter-propagation forward pass: winner class -> wheel commands."""
    k = winner_index(kohonen, s)
    wl = shifted_sigmoid(grossberg[k, 0], slope)
    wr = shifted_sigmoid(grossberg[k, 1], slope)
    return k, wl, wr


@njit(cache=True)
def ffn_commands(kohonen, grossberg, slope, s):
    """Feed-forward pass reusing the same weight layout as a dense net."""
    wl_acc = 0.0
    wr_acc = 0.0
    for i in range(kohonen.shape[0]):
        acc = 0.0
        for j in range(kohonen.shape[1]):
            acc += kohonen[i, j] * s[j]
        hid = 1.0 / (1.0 + math.exp(-slope * acc))
        wl_acc += grossberg[i, 0] * hid
        wr_acc += grossberg[i, 1] * hid
    return shifted_sigmoid(wl_acc, slope), shifted_sigmoid(wr_acc, slope)


@njit(cache=True)
def kohonen_pull(kohonen, s, eta, k):
    """Move winner row k toward s by rate eta (in place)."""
    for j in range(kohonen.shape[1]):
        kohonen[k, j] += eta * (s[j] - kohonen[k, j])


@njit(cache=True)
def nearest_remaining_dist(targets, remaining, px, py):
    """Distance to the nearest remaining target; inf if none remain."""
    best = np.inf
    for t in range(targets.shape[0]):
        if remaining[t]:
            dx = targets[t, 0] - px
            dy = targets[t, 1] - py
            d = math.sqrt(dx * dx + dy * dy)
            if d < best:
                best = d
    return best


@njit(cache=True)
def run_episode_kernel(walls, targets, kohonen, grossberg, slope, is_ffnc,
                       learn, x, y, h, body_radius, wheel_radius, axle_length,
                       dt, speed_limit, ir_range, ir_half_span, target_range,
                       target_half_span, sensor_headings, max_step, hit_reward,
                       eta0, decay, path, events):
    """Run one controller episode; the core simulation loop.

    Per step: read sensors, (learning CPNC only) pull the winner Kohonen
    row toward the input with an exponentially decaying rate, run the
    forward pass, move, then accumulate both fitness increments. A step
    that would collide is rolled back and terminates the episode; hitting
    the last remaining target respawns all of them.

    `kohonen` is updated in place when learning. `path` must be
    (max_step + 1, 3) and receives poses; `events` must be (max_step,)
    int64 and receives a consumed-target bitmask per step (-1 marks the
    collision step). Returns (f1, f2, steps, collided, first_hit_step,
    consumed_count); fitness sums are averaged over max_step.
    """
    nt = targets.shape[0]
    remaining = np.ones(nt, dtype=np.bool_)
    s = np.empty(16, dtype=np.float64)
    path[0, 0] = x
    path[0, 1] = y
    path[0, 2] = h
    f1 = 0.0
    f2 = 0.0
    steps = 0
    collided = False
    first_hit = -1
    consumed = 0
    for j in range(max_step):
        read_sensors(walls, targets, remaining, x, y, h, body_radius,
                     ir_range, ir_half_span, target_range, target_half_span,
                     sensor_headings, s)
        if learn and not is_ffnc:
            eta = eta0 * math.exp(-decay * j)
            k = winner_index(kohonen, s)
            kohonen_pull(kohonen, s, eta, k)
        if is_ffnc:
            wl, wr = ffn_commands(kohonen, grossberg, slope, s)
        else:
            _, wl, wr = cpn_commands(kohonen, grossberg, slope, s)
        nx, ny, nh = step_kinematics(x, y, h, wl, wr, wheel_radius,
                                     axle_length, dt, speed_limit)
        imax = 0.0
        for q in range(8):
            if s[q] > imax:
                imax = s[q]
        dv = abs(wl - wr)
        f1 += abs(wl + wr) * (1.0 - math.sqrt(dv)) * (1.0 - imax)
        steps = j + 1
        if min_wall_dist(walls, nx, ny) < body_radius:
            collided = True
            path[j + 1, 0] = x
            path[j + 1, 1] = y
            path[j + 1, 2] = h
            events[j] = -1
            d = nearest_remaining_dist(targets, remaining, x, y)
            f2 += 1.0 / (1.0 + d)
            break
        x = nx
        y = ny
        h = nh
        mask = 0
        for t in range(nt):
            if remaining[t]:
                dx = targets[t, 0] - x
                dy = targets[t, 1] - y
                if math.sqrt(dx * dx + dy * dy) <= body_radius:
                    remaining[t] = False
                    mask |= 1 << t
                    consumed += 1
        if mask != 0:
            if first_hit < 0:
                first_hit = j + 1
            alive = False
            for t in range(nt):
                if remaining[t]:
                    alive = True
                    break
            if not alive:
                for t in range(nt):
                    remaining[t] = True
            f2 += hit_reward
        else:
            d = nearest_remaining_dist(targets, remaining, x, y)
            f2 += 1.0 / (1.0 + d)
        path[j + 1, 0] = x
        path[j + 1, 1] = y
        path[j + 1, 2] = h
        events[j] = mask
    return f1 / max_step, f2 / max_step, steps, collided, first_hit, consumed
