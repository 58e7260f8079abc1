#include "psched/generator.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <random>
#include <set>

#include "psched/toolkit.hpp"

namespace psched {

namespace {

using Rgb = std::array<double, 3>;

// COCO-WholeBody index groups.
constexpr int body_end = 17;
constexpr int foot_end = 23;
constexpr int face_end = 91;
constexpr int left_hand_end = 112;
constexpr int wholebody_count = 133;

enum Joint { nose = 0, l_shoulder = 5, r_shoulder = 6, l_elbow = 7, r_elbow = 8, l_wrist = 9, r_wrist = 10,
             l_hip = 11, r_hip = 12, l_knee = 13, r_knee = 14, l_ankle = 15, r_ankle = 16 };

double round2(double v) { return std::round(v * 100.0) / 100.0; }

double smooth_bump(double t)
{
    // 0 -> 1 -> 0 over t in [0, 1]
    if (t <= 0.0 || t >= 1.0) return 0.0;
    const double s = std::sin(std::numbers::pi * t);
    return s * s;
}

struct Waypoint {
    int frame = 0;
    double cx = 0.0;
    double cy = 0.0;
    double w = 0.0;
    double h = 0.0;
};

enum class ActivityKind { PageTurn, Bite, Sip, Nod };

struct Activity {
    ActivityKind kind;
    int start = 0;
    int duration = 1;
};

struct HumanScript {
    int id = 0;
    std::vector<Waypoint> path;
    std::vector<Activity> activities;
    double gait_period = 30.0;
    Rgb shirt{};
    Rgb pants{};
    int cup_id = -1;
    double relevance = 1.0;
};

struct ObjectScript {
    int id = 0;
    PatchRegion box;
    double relevance = 0.0;
    Rgb color{};
    int carried_by = -1;
};

struct Scene {
    std::vector<ObjectScript> objects;
    std::vector<HumanScript> humans;
    bool outdoor = false;
};

Waypoint pose_at(const std::vector<Waypoint>& path, double k)
{
    if (k <= path.front().frame) return path.front();
    if (k >= path.back().frame) return path.back();
    for (std::size_t i = 1; i < path.size(); ++i) {
        const auto& a = path[i - 1];
        const auto& b = path[i];
        if (k <= b.frame) {
            const double t = b.frame == a.frame ? 1.0 : (k - a.frame) / (b.frame - a.frame);
            return {static_cast<int>(k), a.cx + t * (b.cx - a.cx), a.cy + t * (b.cy - a.cy), a.w + t * (b.w - a.w),
                    a.h + t * (b.h - a.h)};
        }
    }
    return path.back();
}

struct HumanFrame {
    PatchRegion box;  // unclipped
    std::vector<Keypoint> keypoints;
    double sip = 0.0;  // envelope of an ongoing sip
    Keypoint right_hand{};
};

HumanFrame animate(const HumanScript& s, int k, const std::vector<Keypoint>& tmpl)
{
    const auto wp = pose_at(s.path, k);
    const auto wp_prev = pose_at(s.path, k - 1);
    const double speed = std::hypot(wp.cx - wp_prev.cx, wp.cy - wp_prev.cy);
    HumanFrame out;
    out.box = PatchRegion::from_center(wp.cx, wp.cy, wp.w, wp.h);
    out.keypoints.resize(tmpl.size());
    for (std::size_t i = 0; i < tmpl.size(); ++i)
        out.keypoints[i] = {out.box.x + tmpl[i].x * wp.w, out.box.y + tmpl[i].y * wp.h};
    if (tmpl.size() != wholebody_count) return out;

    auto shift = [&](int first, int last, double dx, double dy) {
        for (int i = first; i < last; ++i) {
            out.keypoints[i].x += dx;
            out.keypoints[i].y += dy;
        }
    };
    auto shift_one = [&](int i, double dx, double dy) { shift(i, i + 1, dx, dy); };

    // Gait swing grows with walking speed.
    const double amp = 0.12 * wp.h * std::min(speed / 6.0, 1.0);
    if (amp > 0.0) {
        const double sw = amp * std::sin(2.0 * std::numbers::pi * k / s.gait_period);
        shift_one(l_knee, 0.5 * sw, 0.0);
        shift_one(l_ankle, sw, 0.0);
        shift(body_end, body_end + 3, sw, 0.0);
        shift_one(r_knee, -0.5 * sw, 0.0);
        shift_one(r_ankle, -sw, 0.0);
        shift(body_end + 3, foot_end, -sw, 0.0);
        shift_one(l_elbow, -0.3 * sw, 0.0);
        shift_one(l_wrist, -0.6 * sw, 0.0);
        shift(face_end, left_hand_end, -0.6 * sw, 0.0);
        shift_one(r_elbow, 0.3 * sw, 0.0);
        shift_one(r_wrist, 0.6 * sw, 0.0);
        shift(left_hand_end, wholebody_count, 0.6 * sw, 0.0);
    }

    for (const auto& a : s.activities) {
        const double e = smooth_bump((k - a.start + 0.5) / a.duration);
        if (e == 0.0) continue;
        switch (a.kind) {
        case ActivityKind::PageTurn: {
            const double dx = 0.6 * wp.w * e;
            shift_one(r_elbow, 0.4 * dx, -0.05 * wp.h * e);
            shift_one(r_wrist, dx, -0.08 * wp.h * e);
            shift(left_hand_end, wholebody_count, dx, -0.08 * wp.h * e);
            break;
        }
        case ActivityKind::Bite:
        case ActivityKind::Sip: {
            const auto& wr = out.keypoints[r_wrist];
            const auto& ns = out.keypoints[nose];
            const double dx = (ns.x - 0.05 * wp.w - wr.x) * e;
            const double dy = (ns.y + 0.06 * wp.h - wr.y) * e;
            shift_one(r_elbow, 0.5 * dx, 0.5 * dy);
            shift_one(r_wrist, dx, dy);
            shift(left_hand_end, wholebody_count, dx, dy);
            if (a.kind == ActivityKind::Sip) out.sip = std::max(out.sip, e);
            break;
        }
        case ActivityKind::Nod:
            shift(0, 5, 0.0, 0.04 * wp.h * e);
            shift(foot_end, face_end, 0.0, 0.04 * wp.h * e);
            break;
        }
    }
    out.right_hand = out.keypoints[r_wrist];
    return out;
}

// Supersampled canvas, two samples per raster pixel along each axis.
class Canvas {
public:
    Canvas(int raster_w, int raster_h, double scale)
        : w_(raster_w * 2), h_(raster_h * 2), step_(scale / 2.0), samples_(static_cast<std::size_t>(w_) * h_)
    {
    }

    double sample_x(int i) const { return (i + 0.5) * step_; }
    double sample_y(int j) const { return (j + 0.5) * step_; }

    void paint_background(bool outdoor)
    {
        for (int j = 0; j < h_; ++j)
            for (int i = 0; i < w_; ++i) {
                const double x = sample_x(i);
                const double y = sample_y(j);
                Rgb c;
                if (outdoor) {
                    if (y < 150.0) {
                        c = {150.0, 190.0, 230.0 - 0.1 * y};
                    } else if (y < 250.0) {
                        const bool window = std::fmod(x, 64.0) > 40.0 && std::fmod(y, 40.0) > 18.0;
                        c = window ? Rgb{70.0, 80.0, 100.0} : Rgb{170.0, 140.0, 120.0};
                    } else {
                        const bool seam = std::fmod(x + 0.5 * y, 48.0) < 3.0 || std::fmod(y, 36.0) < 3.0;
                        c = seam ? Rgb{85.0, 85.0, 85.0} : Rgb{125.0, 122.0, 118.0};
                    }
                } else {
                    if (y < 290.0) {
                        const double stripe = std::fmod(x, 40.0) < 20.0 ? 10.0 : -10.0;
                        c = {190.0 + stripe, 175.0 + stripe, 150.0};
                    } else {
                        const bool plank = std::fmod(y, 30.0) < 2.5;
                        c = plank ? Rgb{80.0, 55.0, 35.0} : Rgb{135.0, 100.0, 65.0};
                    }
                }
                at(i, j) = c;
            }
    }

    template <class Inside>
    void paint(double x0, double y0, double x1, double y1, Inside&& inside)
    {
        const int i0 = std::max(0, static_cast<int>(std::floor(x0 / step_ - 0.5)));
        const int i1 = std::min(w_ - 1, static_cast<int>(std::ceil(x1 / step_ - 0.5)));
        const int j0 = std::max(0, static_cast<int>(std::floor(y0 / step_ - 0.5)));
        const int j1 = std::min(h_ - 1, static_cast<int>(std::ceil(y1 / step_ - 0.5)));
        for (int j = j0; j <= j1; ++j)
            for (int i = i0; i <= i1; ++i)
                if (auto c = inside(sample_x(i), sample_y(j))) at(i, j) = *c;
    }

    void rect(const PatchRegion& r, const Rgb& fill, const Rgb& border, double border_px, double checker_px = 0.0)
    {
        paint(r.x, r.y, r.x + r.w, r.y + r.h, [&](double x, double y) -> std::optional<Rgb> {
            if (x < r.x || x >= r.x + r.w || y < r.y || y >= r.y + r.h) return std::nullopt;
            if (x - r.x < border_px || r.x + r.w - x < border_px || y - r.y < border_px || r.y + r.h - y < border_px)
                return border;
            if (checker_px > 0.0) {
                const int cell = static_cast<int>(std::floor((x - r.x) / checker_px) + std::floor((y - r.y) / checker_px));
                if (cell % 2 != 0) return Rgb{fill[0] * 0.7, fill[1] * 0.7, fill[2] * 0.7};
            }
            return fill;
        });
    }

    void disk(const Keypoint& c, double radius, const Rgb& fill)
    {
        paint(c.x - radius, c.y - radius, c.x + radius, c.y + radius, [&](double x, double y) -> std::optional<Rgb> {
            if (std::hypot(x - c.x, y - c.y) > radius) return std::nullopt;
            return fill;
        });
    }

    void capsule(const Keypoint& a, const Keypoint& b, double radius, const Rgb& fill)
    {
        const double dx = b.x - a.x;
        const double dy = b.y - a.y;
        const double len2 = dx * dx + dy * dy;
        paint(std::min(a.x, b.x) - radius, std::min(a.y, b.y) - radius, std::max(a.x, b.x) + radius,
              std::max(a.y, b.y) + radius, [&](double x, double y) -> std::optional<Rgb> {
                  double t = len2 > 0.0 ? ((x - a.x) * dx + (y - a.y) * dy) / len2 : 0.0;
                  t = std::clamp(t, 0.0, 1.0);
                  if (std::hypot(x - a.x - t * dx, y - a.y - t * dy) > radius) return std::nullopt;
                  return fill;
              });
    }

    RgbImage downsample() const
    {
        RgbImage img(w_ / 2, h_ / 2);
        for (int v = 0; v < img.height; ++v)
            for (int u = 0; u < img.width; ++u)
                for (int c = 0; c < 3; ++c) {
                    const double sum = at(2 * u, 2 * v)[c] + at(2 * u + 1, 2 * v)[c] + at(2 * u, 2 * v + 1)[c] +
                                       at(2 * u + 1, 2 * v + 1)[c];
                    img.channel(u, v, c) = static_cast<std::uint8_t>(std::clamp(std::lround(sum / 4.0), 0L, 255L));
                }
        return img;
    }

private:
    Rgb& at(int i, int j) { return samples_[static_cast<std::size_t>(j) * w_ + i]; }
    const Rgb& at(int i, int j) const { return samples_[static_cast<std::size_t>(j) * w_ + i]; }

    int w_;
    int h_;
    double step_;
    std::vector<Rgb> samples_;
};

void draw_human(Canvas& canvas, const HumanScript& s, const HumanFrame& f)
{
    const auto& kp = f.keypoints;
    const double h = f.box.h;
    const Rgb skin{205.0, 160.0, 130.0};
    if (kp.size() != wholebody_count) {
        canvas.rect(f.box, s.shirt, s.pants, 0.05 * h, 0.06 * h);
        return;
    }
    const double limb = 0.035 * h;
    canvas.capsule(kp[l_hip], kp[l_knee], limb, s.pants);
    canvas.capsule(kp[l_knee], kp[l_ankle], limb, s.pants);
    canvas.capsule(kp[r_hip], kp[r_knee], limb, s.pants);
    canvas.capsule(kp[r_knee], kp[r_ankle], limb, s.pants);
    const double tx0 = std::min(kp[r_shoulder].x, kp[r_hip].x);
    const double tx1 = std::max(kp[l_shoulder].x, kp[l_hip].x);
    const double ty0 = std::min(kp[l_shoulder].y, kp[r_shoulder].y);
    const double ty1 = std::max(kp[l_hip].y, kp[r_hip].y);
    canvas.rect({tx0, ty0, tx1 - tx0, ty1 - ty0}, s.shirt, s.shirt, 0.0, 0.06 * h);
    canvas.capsule(kp[l_shoulder], kp[l_elbow], limb, s.shirt);
    canvas.capsule(kp[l_elbow], kp[l_wrist], 0.8 * limb, skin);
    canvas.capsule(kp[r_shoulder], kp[r_elbow], limb, s.shirt);
    canvas.capsule(kp[r_elbow], kp[r_wrist], 0.8 * limb, skin);
    canvas.disk(kp[l_wrist], 0.04 * h, skin);
    canvas.disk(kp[r_wrist], 0.04 * h, skin);
    canvas.disk(kp[nose], 0.075 * h, skin);
    canvas.disk({kp[nose].x, kp[nose].y - 0.05 * h}, 0.05 * h, Rgb{60.0, 40.0, 30.0});
}

Rgb random_color(std::mt19937_64& rng)
{
    std::uniform_real_distribution<double> u(40.0, 220.0);
    return {u(rng), u(rng), u(rng)};
}

std::vector<Activity> schedule(std::mt19937_64& rng, ActivityKind kind, int from, int to, int min_gap, int max_gap,
                               int duration)
{
    std::vector<Activity> out;
    std::uniform_int_distribution<int> gap(min_gap, max_gap);
    for (int t = from + gap(rng); t + duration < to; t += duration + gap(rng)) out.push_back({kind, t, duration});
    return out;
}

Scene static_scene(int n, std::mt19937_64& rng)
{
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    Scene sc;
    sc.objects = {
        {1, {300.0, 330.0, 260.0, 110.0}, 0.3, {120.0, 80.0, 45.0}},
        {2, {380.0, 300.0, 50.0, 30.0}, 0.8, {170.0, 30.0, 40.0}},
        {3, {560.0, 150.0, 40.0, 120.0}, 0.0, {230.0, 220.0, 120.0}},
    };
    HumanScript h;
    h.id = 10;
    h.shirt = {40.0, 90.0, 170.0};
    h.pants = {50.0, 50.0, 60.0};
    const double v = 5.0 + 2.0 * u01(rng);
    const int enter = static_cast<int>(std::lround(n * (0.05 + 0.03 * u01(rng))));
    const int arrive = enter + static_cast<int>(std::lround(400.0 / v));
    const int seated = arrive + 25;
    const int leave = std::max(seated + 60, static_cast<int>(std::lround(n * (0.72 + 0.04 * u01(rng)))));
    const int standing = leave + 25;
    const int gone = standing + static_cast<int>(std::lround(390.0 / v));
    h.path = {{enter, -70.0, 310.0, 110.0, 300.0},  {arrive, 330.0, 310.0, 110.0, 300.0},
              {seated, 330.0, 300.0, 120.0, 220.0}, {leave, 330.0, 300.0, 120.0, 220.0},
              {standing, 330.0, 310.0, 110.0, 300.0}, {gone, 720.0, 310.0, 110.0, 300.0}};
    h.activities = schedule(rng, ActivityKind::PageTurn, seated + 30, leave - 30, 70, 130, 24);
    auto nods = schedule(rng, ActivityKind::Nod, seated + 45, leave - 30, 200, 400, 30);
    h.activities.insert(h.activities.end(), nods.begin(), nods.end());
    sc.humans.push_back(std::move(h));
    return sc;
}

Scene interaction_scene(int n, std::mt19937_64& rng)
{
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    Scene sc;
    sc.objects = {
        {1, {170.0, 330.0, 300.0, 120.0}, 0.3, {120.0, 80.0, 45.0}},
        {2, {290.0, 320.0, 70.0, 20.0}, 0.6, {235.0, 235.0, 235.0}},
        {3, {380.0, 296.0, 26.0, 34.0}, 0.8, {40.0, 110.0, 200.0}, 10},
    };
    HumanScript h;
    h.id = 10;
    h.shirt = {160.0, 60.0, 60.0};
    h.pants = {60.0, 60.0, 80.0};
    h.cup_id = 3;
    h.path = {{0, 320.0, 250.0, 130.0, 230.0}};
    // Occasional leaning shifts the seated box a little.
    for (int t = 200 + static_cast<int>(200 * u01(rng)); t + 80 < n; t += 300 + static_cast<int>(200 * u01(rng))) {
        const double dx = u01(rng) < 0.5 ? -14.0 : 14.0;
        h.path.push_back({t, 320.0, 250.0, 130.0, 230.0});
        h.path.push_back({t + 20, 320.0 + dx, 250.0, 130.0, 230.0});
        h.path.push_back({t + 60, 320.0 + dx, 250.0, 130.0, 230.0});
        h.path.push_back({t + 80, 320.0, 250.0, 130.0, 230.0});
    }
    h.path.push_back({n, 320.0, 250.0, 130.0, 230.0});
    h.activities = schedule(rng, ActivityKind::Bite, 0, n, 60, 140, 40);
    // Sips only where no bite is ongoing.
    for (const auto& sip : schedule(rng, ActivityKind::Sip, 0, n, 250, 450, 60)) {
        const bool clash = std::any_of(h.activities.begin(), h.activities.end(), [&](const Activity& a) {
            return a.start < sip.start + sip.duration && sip.start < a.start + a.duration;
        });
        if (!clash) h.activities.push_back(sip);
    }
    sc.humans.push_back(std::move(h));

    HumanScript passer;
    passer.id = 11;
    passer.shirt = {70.0, 140.0, 70.0};
    passer.pants = {90.0, 80.0, 60.0};
    const int start = static_cast<int>(std::lround(n * (0.35 + 0.1 * u01(rng))));
    const double v = 4.0 + 2.0 * u01(rng);
    passer.path = {{start, 700.0, 200.0, 70.0, 190.0},
                   {start + static_cast<int>(std::lround(780.0 / v)), -80.0, 200.0, 70.0, 190.0}};
    sc.humans.insert(sc.humans.begin(), std::move(passer));
    return sc;
}

Scene walking_scene(int n, std::mt19937_64& rng)
{
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    Scene sc;
    sc.outdoor = true;
    sc.objects = {
        {1, {60.0, 360.0, 160.0, 60.0}, 0.2, {110.0, 75.0, 40.0}},
        {2, {480.0, 120.0, 90.0, 260.0}, 0.0, {50.0, 120.0, 50.0}},
        {3, {250.0, 380.0, 40.0, 60.0}, 0.1, {60.0, 60.0, 60.0}},
    };
    int id = 10;
    for (int t = static_cast<int>(20 * u01(rng)); t < n;) {
        HumanScript h;
        h.id = id++;
        h.shirt = random_color(rng);
        h.pants = random_color(rng);
        // Far pedestrians pass behind and do not concern the robot.
        const bool far = u01(rng) < 0.5;
        h.relevance = far ? 0.0 : 1.0;
        const double height = far ? 130.0 + 40.0 * u01(rng) : 240.0 + 80.0 * u01(rng);
        const double width = 0.37 * height;
        const double v = far ? 3.0 + 3.0 * u01(rng) : 5.0 + 5.0 * u01(rng);
        const double cy = far ? 250.0 - height / 2.0 + 20.0 * (u01(rng) - 0.5)
                              : 480.0 - 30.0 - height / 2.0 + 20.0 * (u01(rng) - 0.5);
        const double span = 640.0 + width + 20.0;
        const int duration = static_cast<int>(std::lround(span / v));
        const double left = -width / 2.0 - 10.0;
        const double right = 640.0 + width / 2.0 + 10.0;
        const bool rightward = u01(rng) < 0.5;
        h.path = {{t, rightward ? left : right, cy, width, height},
                  {t + duration, rightward ? right : left, cy, width, height}};
        h.gait_period = 24.0 + 12.0 * u01(rng);
        sc.humans.push_back(std::move(h));
        t += 10 + static_cast<int>(duration * (0.3 + 0.8 * u01(rng)));
    }
    return sc;
}

std::optional<PatchRegion> clip_to_frame(const PatchRegion& r, double fw, double fh)
{
    const double x0 = std::max(r.x, 0.0);
    const double y0 = std::max(r.y, 0.0);
    const double x1 = std::min(r.x + r.w, fw);
    const double y1 = std::min(r.y + r.h, fh);
    if (x1 - x0 < 2.0 || y1 - y0 < 2.0) return std::nullopt;
    return PatchRegion{round2(x0), round2(y0), round2(x1 - x0), round2(y1 - y0)};
}

}  // namespace

std::string_view to_string(Archetype a)
{
    switch (a) {
    case Archetype::Static: return "static";
    case Archetype::Interaction: return "interaction";
    case Archetype::Walking: return "walking";
    }
    return "static";
}

Archetype parse_archetype(std::string_view text)
{
    if (text == "static") return Archetype::Static;
    if (text == "interaction") return Archetype::Interaction;
    if (text == "walking") return Archetype::Walking;
    throw StructuralError("unknown archetype " + std::string(text));
}

std::vector<Keypoint> keypoint_template(int keypoint_count)
{
    if (keypoint_count <= 0) throw StructuralError("keypoint count must be positive");
    std::vector<Keypoint> t;
    if (keypoint_count != wholebody_count) {
        // Generic layout: a column-major grid over the box.
        const int cols = static_cast<int>(std::ceil(std::sqrt(keypoint_count / 2.0)));
        const int rows = (keypoint_count + cols - 1) / cols;
        for (int i = 0; i < keypoint_count; ++i)
            t.push_back({(i % cols + 0.5) / cols, (i / cols + 0.5) / rows});
        return t;
    }
    t = {{0.50, 0.08}, {0.53, 0.06}, {0.47, 0.06}, {0.57, 0.07}, {0.43, 0.07}, {0.70, 0.20},
         {0.30, 0.20}, {0.78, 0.36}, {0.22, 0.36}, {0.80, 0.50}, {0.20, 0.50}, {0.62, 0.52},
         {0.38, 0.52}, {0.62, 0.73}, {0.38, 0.73}, {0.62, 0.94}, {0.38, 0.94}};
    // feet: big toe, small toe, heel (left then right)
    for (double s : {1.0, -1.0}) {
        t.push_back({0.5 + s * 0.14, 0.985});
        t.push_back({0.5 + s * 0.18, 0.98});
        t.push_back({0.5 + s * 0.09, 0.97});
    }
    // face contour, brows, nose, eyes, mouth on a small ellipse around the head
    for (int i = 0; i < face_end - foot_end; ++i) {
        const double ring = 0.35 + 0.65 * ((i % 3) + 1) / 3.0;
        const double a = 2.0 * std::numbers::pi * i / (face_end - foot_end);
        t.push_back({0.50 + 0.06 * ring * std::cos(a), 0.08 + 0.045 * ring * std::sin(a)});
    }
    // hands: wrist root then four joints on five fingers
    for (const Keypoint wrist : {t[l_wrist], t[r_wrist]}) {
        const double side = wrist.x > 0.5 ? 1.0 : -1.0;
        t.push_back(wrist);
        for (int finger = 0; finger < 5; ++finger) {
            const double a = (-0.6 + 0.3 * finger) * side;
            for (int joint = 1; joint <= 4; ++joint) {
                const double r = 0.012 * joint;
                t.push_back({wrist.x + side * r * std::cos(a), wrist.y + r * (0.6 + std::sin(a))});
            }
        }
    }
    return t;
}

Trace generate_trace(const GeneratorOptions& opt)
{
    if (opt.frames < 2) throw StructuralError("a trace needs at least two frames");
    if (!(opt.frame_width > 0.0 && opt.frame_height > 0.0 && opt.raster_scale > 0.0 && opt.frame_period_ms > 0.0))
        throw StructuralError("frame geometry and period must be positive");

    std::mt19937_64 rng(mix_seed(opt.seed, 0x5ce7e + static_cast<std::uint64_t>(opt.archetype)));
    Scene scene;
    switch (opt.archetype) {
    case Archetype::Static: scene = static_scene(opt.frames, rng); break;
    case Archetype::Interaction: scene = interaction_scene(opt.frames, rng); break;
    case Archetype::Walking: scene = walking_scene(opt.frames, rng); break;
    }
    const auto tmpl = keypoint_template(opt.keypoint_count);

    Trace trace;
    auto& h = trace.header;
    h.archetype = std::string(to_string(opt.archetype));
    h.seed = opt.seed;
    h.frame_width = opt.frame_width;
    h.frame_height = opt.frame_height;
    h.frame_period_ms = opt.frame_period_ms;
    h.keypoint_count = opt.keypoint_count;
    h.raster_scale = opt.raster_scale;

    const int rw = static_cast<int>(std::ceil(opt.frame_width / opt.raster_scale));
    const int rh = static_cast<int>(std::ceil(opt.frame_height / opt.raster_scale));
    Canvas background(rw, rh, opt.raster_scale);
    background.paint_background(scene.outdoor);

    const ChangeDetectConfig cd;
    std::optional<RgbImage> prev_image;
    std::set<int> prev_visible;
    trace.frames.reserve(static_cast<std::size_t>(opt.frames));
    for (int k = 0; k < opt.frames; ++k) {
        TraceFrame frame;
        frame.stamp = FrameStamp::at(k, opt.frame_period_ms);
        Canvas canvas = background;

        std::vector<HumanFrame> humans;
        for (const auto& hs : scene.humans) humans.push_back(animate(hs, k, tmpl));

        for (const auto& obj : scene.objects) {
            PatchRegion box = obj.box;
            if (obj.carried_by >= 0) {
                for (std::size_t i = 0; i < scene.humans.size(); ++i) {
                    if (scene.humans[i].id != obj.carried_by || humans[i].sip == 0.0) continue;
                    const double e = humans[i].sip;
                    const auto& hand = humans[i].right_hand;
                    const double cx = box.center_x() + e * (hand.x - box.center_x());
                    const double cy = box.center_y() + e * (hand.y - 0.4 * box.h - box.center_y());
                    box = PatchRegion::from_center(cx, cy, box.w, box.h);
                }
            }
            canvas.rect(box, obj.color, {obj.color[0] * 0.5, obj.color[1] * 0.5, obj.color[2] * 0.5}, 4.0);
            if (auto clipped = clip_to_frame(box, opt.frame_width, opt.frame_height))
                frame.entities.push_back({obj.id, EntityKind::Object, *clipped, obj.relevance, {}, std::nullopt});
        }
        for (std::size_t i = 0; i < scene.humans.size(); ++i) {
            const auto& hs = scene.humans[i];
            if (k < hs.path.front().frame || k > hs.path.back().frame) continue;
            auto clipped = clip_to_frame(humans[i].box, opt.frame_width, opt.frame_height);
            if (!clipped) continue;
            draw_human(canvas, hs, humans[i]);
            TraceEntity e{hs.id, EntityKind::Human, *clipped, hs.relevance, {}, std::nullopt};
            e.keypoints.reserve(humans[i].keypoints.size());
            for (const auto& kp : humans[i].keypoints) e.keypoints.push_back({round2(kp.x), round2(kp.y)});
            frame.entities.push_back(std::move(e));
        }

        std::set<int> visible;
        for (const auto& e : frame.entities) {
            visible.insert(e.id);
            if (!prev_visible.contains(e.id)) frame.events.push_back({TraceEventKind::Enter, e.id});
        }
        for (int id : prev_visible)
            if (!visible.contains(id)) frame.events.push_back({TraceEventKind::Exit, id});
        prev_visible = std::move(visible);

        RgbImage image = canvas.downsample();
        if (!opt.raster) {
            PrecomputedChange change;
            PixelMask mask(image.width, image.height, true);
            for (auto& e : frame.entities) {
                const auto r = trace.to_raster(e.box);
                mask.exclude(r);
                e.change_ratio = prev_image ? patch_change_ratio(*prev_image, image, r, cd) : 0.0;
            }
            if (prev_image) {
                change.background_change_ratio = background_change_ratio(*prev_image, image, mask, cd);
                change.histogram_shift =
                    chi_square_shift(channel_histograms(*prev_image, mask, cd.histogram_bins),
                                     channel_histograms(image, mask, cd.histogram_bins), cd)
                        .mean;
            }
            frame.change = change;
            prev_image = std::move(image);
        } else {
            frame.raster = std::move(image);
        }
        trace.frames.push_back(std::move(frame));
    }
    trace.validate();
    return trace;
}

}  // namespace psched
