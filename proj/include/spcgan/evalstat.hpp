#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "spcgan/image.hpp"

namespace spcgan {

struct DegenerateSampleError : Error {
    using Error::Error;
};

// Dice similarity coefficient 2|X n Y| / (|X| + |Y|). Both-empty pairs return
// 1.0 (perfect-agreement convention) and set the flag so reports can mark it.
inline double dice(const SegMask& x, const SegMask& y, bool* both_empty = nullptr) {
    if (x.height != y.height || x.width != y.width)
        throw ShapeError("dice: mask dimensions differ");
    if (!x.binarized || !y.binarized) throw ValidationError("dice: masks must be binarized");
    int64_t nx = 0, ny = 0, ni = 0;
    for (size_t i = 0; i < x.pix.size(); ++i) {
        bool xv = x.pix[i] > 0.5f, yv = y.pix[i] > 0.5f;
        nx += xv;
        ny += yv;
        ni += (xv && yv);
    }
    if (both_empty) *both_empty = false;
    if (nx + ny == 0) {
        if (both_empty) *both_empty = true;
        return 1.0;
    }
    return 2.0 * double(ni) / double(nx + ny);
}

struct DiceRecord {
    std::string sample_id;
    std::string method;
    double dsc = 0.0;
    LesionClass lesion_class = LesionClass::benign;
    bool empty_pair = false;  // DSC(0,0) convention applied
};

struct GroupStat {
    std::string method;
    std::string group;  // "benign" | "malignant" | "all"
    double mean = 0.0;
    double stddev = 0.0;
    int n = 0;
    bool singleton = false;
};

// Mean and (n-1)-denominator std per (method, class) and per (method, all).
inline std::vector<GroupStat> aggregate(const std::vector<DiceRecord>& records) {
    if (records.empty()) throw ValidationError("aggregate: no records");
    std::map<std::pair<std::string, std::string>, std::vector<double>> groups;
    for (const auto& r : records) {
        groups[{r.method, to_string(r.lesion_class)}].push_back(r.dsc);
        groups[{r.method, "all"}].push_back(r.dsc);
    }
    std::vector<GroupStat> out;
    for (const auto& [key, vals] : groups) {
        GroupStat s;
        s.method = key.first;
        s.group = key.second;
        s.n = int(vals.size());
        double mean = 0.0;
        for (double v : vals) mean += v;
        mean /= double(vals.size());
        s.mean = mean;
        if (vals.size() > 1) {
            double acc = 0.0;
            for (double v : vals) acc += (v - mean) * (v - mean);
            s.stddev = std::sqrt(acc / double(vals.size() - 1));
        } else {
            s.stddev = 0.0;
            s.singleton = true;
        }
        out.push_back(s);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Student-t upper tail via the regularized incomplete beta function
// (continued fraction, no external statistics dependency).
// ---------------------------------------------------------------------------

namespace detail {

inline double betacf(double a, double b, double x) {
    constexpr int kMaxIter = 500;
    constexpr double kEps = 3e-16, kFpMin = 1e-300;
    double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0, d = 1.0 - qab * x / qap;
    if (std::fabs(d) < kFpMin) d = kFpMin;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kFpMin) d = kFpMin;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kFpMin) c = kFpMin;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kFpMin) d = kFpMin;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kFpMin) c = kFpMin;
        d = 1.0 / d;
        double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < kEps) return h;
    }
    throw NumericFault("betacf: continued fraction did not converge");
}

// regularized incomplete beta I_x(a, b)
inline double betai(double a, double b, double x) {
    if (x < 0.0 || x > 1.0) throw DomainError("betai: x outside [0, 1]");
    if (x == 0.0) return 0.0;
    if (x == 1.0) return 1.0;
    double lbeta = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) +
                   b * std::log(1.0 - x);
    double front = std::exp(lbeta);
    if (x < (a + 1.0) / (a + b + 2.0)) return front * betacf(a, b, x) / a;
    return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

}  // namespace detail

// P(T_nu > t) for Student's t distribution.
inline double student_t_upper_tail(double t, double nu) {
    if (!(nu > 0.0)) throw DomainError("student_t_upper_tail: nu must be > 0");
    double x = nu / (nu + t * t);
    double half_tail = 0.5 * detail::betai(0.5 * nu, 0.5, x);
    return t >= 0.0 ? half_tail : 1.0 - half_tail;
}

struct TTestResult {
    double t = 0.0;
    double p = 1.0;
};

// One-sided paired t-test with alternative mean(a - b) > 0.
inline TTestResult paired_ttest_one_sided(const std::vector<double>& a,
                                          const std::vector<double>& b) {
    if (a.size() != b.size()) throw ValidationError("paired_ttest: length mismatch");
    const size_t n = a.size();
    if (n < 2) throw ValidationError("paired_ttest: need at least 2 pairs");
    std::vector<double> d(n);
    for (size_t i = 0; i < n; ++i) d[i] = a[i] - b[i];
    double mean = 0.0;
    for (double v : d) mean += v;
    mean /= double(n);
    double acc = 0.0;
    for (double v : d) acc += (v - mean) * (v - mean);
    double sd = std::sqrt(acc / double(n - 1));
    if (sd == 0.0)
        throw DegenerateSampleError("paired_ttest: zero-variance differences, no test statistic");
    TTestResult r;
    r.t = mean * std::sqrt(double(n)) / sd;
    r.p = student_t_upper_tail(r.t, double(n - 1));
    return r;
}

struct TestRow {
    std::string method_a;
    std::string method_b;
    double t = 0.0;
    double p = 1.0;
    double alpha = 0.05;
    bool reject = false;
};

struct SweepRow {
    int size = 0;
    std::string regime;
    uint64_t seed = 0;
    double mean_dsc = 0.0;
    double std_dsc = 0.0;
};

struct EvalReport {
    std::vector<DiceRecord> records;
    std::vector<GroupStat> group_stats;
    std::vector<TestRow> tests;
    std::vector<SweepRow> sweep;  // optional learning-curve table
};

// ---------------------------------------------------------------------------
// Report emission: fixed CSV schemas plus SVG boxplots / learning curves.
// ---------------------------------------------------------------------------

namespace detail {

inline double quantile(std::vector<double> v, double q) {
    std::sort(v.begin(), v.end());
    if (v.size() == 1) return v[0];
    double pos = q * double(v.size() - 1);
    size_t lo = size_t(pos);
    size_t hi = std::min(lo + 1, v.size() - 1);
    double frac = pos - double(lo);
    return v[lo] * (1.0 - frac) + v[hi] * frac;
}

inline void write_file(const std::filesystem::path& p, const std::string& content) {
    std::ofstream out(p);
    if (!out) throw IoError("cannot write " + p.string());
    out << content;
}

inline std::string svg_boxplot(const std::string& method, const std::vector<double>& vals) {
    double mn = *std::min_element(vals.begin(), vals.end());
    double mx = *std::max_element(vals.begin(), vals.end());
    double q1 = quantile(vals, 0.25), q2 = quantile(vals, 0.5), q3 = quantile(vals, 0.75);
    // y axis: dsc in [0,1] mapped to [260, 20]
    auto y = [](double v) { return 260.0 - 240.0 * std::clamp(v, 0.0, 1.0); };
    std::string s;
    s += "<svg xmlns='http://www.w3.org/2000/svg' width='220' height='300'>\n";
    s += "<rect width='220' height='300' fill='white'/>\n";
    s += "<line x1='40' y1='20' x2='40' y2='260' stroke='black'/>\n";
    for (int tick = 0; tick <= 10; tick += 2) {
        double v = tick / 10.0;
        s += "<line x1='36' y1='" + fmt_fixed(y(v), 1) + "' x2='40' y2='" + fmt_fixed(y(v), 1) +
             "' stroke='black'/>\n";
        s += "<text x='8' y='" + fmt_fixed(y(v) + 4, 1) + "' font-size='10'>" + fmt_fixed(v, 1) +
             "</text>\n";
    }
    const double cx = 130.0, half = 35.0;
    s += "<line x1='" + fmt_fixed(cx, 1) + "' y1='" + fmt_fixed(y(mn), 1) + "' x2='" +
         fmt_fixed(cx, 1) + "' y2='" + fmt_fixed(y(mx), 1) + "' stroke='black'/>\n";
    for (double w : {mn, mx})
        s += "<line x1='" + fmt_fixed(cx - 15, 1) + "' y1='" + fmt_fixed(y(w), 1) + "' x2='" +
             fmt_fixed(cx + 15, 1) + "' y2='" + fmt_fixed(y(w), 1) + "' stroke='black'/>\n";
    s += "<rect x='" + fmt_fixed(cx - half, 1) + "' y='" + fmt_fixed(y(q3), 1) + "' width='" +
         fmt_fixed(2 * half, 1) + "' height='" + fmt_fixed(y(q1) - y(q3), 1) +
         "' fill='lightsteelblue' stroke='black'/>\n";
    s += "<line x1='" + fmt_fixed(cx - half, 1) + "' y1='" + fmt_fixed(y(q2), 1) + "' x2='" +
         fmt_fixed(cx + half, 1) + "' y2='" + fmt_fixed(y(q2), 1) +
         "' stroke='black' stroke-width='2'/>\n";
    s += "<text x='" + fmt_fixed(cx - 5.0 * double(method.size()) / 2.0, 1) +
         "' y='285' font-size='12'>" + method + "</text>\n";
    s += "</svg>\n";
    return s;
}

inline std::string svg_learning_curve(const std::string& regime,
                                      const std::vector<SweepRow>& rows) {
    // rows: one regime, possibly several seeds per size; plot per-size mean
    std::map<int, std::vector<double>> by_size;
    for (const auto& r : rows) by_size[r.size].push_back(r.mean_dsc);
    int max_size = by_size.rbegin()->first;
    auto xmap = [&](double sz) { return 50.0 + 320.0 * sz / double(max_size); };
    auto ymap = [](double v) { return 260.0 - 240.0 * std::clamp(v, 0.0, 1.0); };
    std::string s;
    s += "<svg xmlns='http://www.w3.org/2000/svg' width='400' height='300'>\n";
    s += "<rect width='400' height='300' fill='white'/>\n";
    s += "<line x1='50' y1='260' x2='380' y2='260' stroke='black'/>\n";
    s += "<line x1='50' y1='20' x2='50' y2='260' stroke='black'/>\n";
    std::string pts;
    for (const auto& [size, vals] : by_size) {
        double mean = 0.0;
        for (double v : vals) mean += v;
        mean /= double(vals.size());
        double px = xmap(size), py = ymap(mean);
        pts += fmt_fixed(px, 1) + "," + fmt_fixed(py, 1) + " ";
        s += "<circle cx='" + fmt_fixed(px, 1) + "' cy='" + fmt_fixed(py, 1) +
             "' r='3' fill='steelblue'/>\n";
        s += "<text x='" + fmt_fixed(px - 8, 1) + "' y='275' font-size='10'>" +
             std::to_string(size) + "</text>\n";
    }
    s += "<polyline points='" + pts + "' fill='none' stroke='steelblue'/>\n";
    s += "<text x='150' y='295' font-size='12'>training samples (" + regime + ")</text>\n";
    s += "</svg>\n";
    return s;
}

}  // namespace detail

// Writes records.csv, groups.csv, tests.csv (when tests exist), one boxplot
// per method and, when a sweep table is present, sweep.csv plus one learning
// curve per regime. Outputs are byte-stable for identical reports.
inline void emit_report(const EvalReport& report, const std::filesystem::path& outdir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(outdir, ec);
    if (!fs::is_directory(outdir)) throw IoError("emit_report: unwritable path " + outdir.string());

    std::string rec = "sample_id,method,class,dsc,empty_pair\n";
    for (const auto& r : report.records)
        rec += r.sample_id + "," + r.method + "," + to_string(r.lesion_class) + "," +
               fmt_fixed(r.dsc, 6) + "," + (r.empty_pair ? "1" : "0") + "\n";
    detail::write_file(outdir / "records.csv", rec);

    std::string grp = "method,class,mean,std,n\n";
    for (const auto& g : report.group_stats)
        grp += g.method + "," + g.group + "," + fmt_fixed(g.mean, 6) + "," +
               fmt_fixed(g.stddev, 6) + "," + std::to_string(g.n) + "\n";
    detail::write_file(outdir / "groups.csv", grp);

    if (!report.tests.empty()) {
        std::string t = "a,b,t,p,alpha,reject\n";
        for (const auto& row : report.tests)
            t += row.method_a + "," + row.method_b + "," + fmt_fixed(row.t, 6) + "," +
                 fmt_fixed(row.p, 9) + "," + fmt_fixed(row.alpha, 3) + "," +
                 (row.reject ? "1" : "0") + "\n";
        detail::write_file(outdir / "tests.csv", t);
    }

    std::map<std::string, std::vector<double>> by_method;
    for (const auto& r : report.records) by_method[r.method].push_back(r.dsc);
    for (const auto& [method, vals] : by_method)
        detail::write_file(outdir / ("boxplot_" + method + ".svg"),
                           detail::svg_boxplot(method, vals));

    if (!report.sweep.empty()) {
        std::string sw = "size,regime,seed,mean_dsc,std_dsc\n";
        for (const auto& r : report.sweep)
            sw += std::to_string(r.size) + "," + r.regime + "," + std::to_string(r.seed) + "," +
                  fmt_fixed(r.mean_dsc, 6) + "," + fmt_fixed(r.std_dsc, 6) + "\n";
        detail::write_file(outdir / "sweep.csv", sw);
        std::map<std::string, std::vector<SweepRow>> by_regime;
        for (const auto& r : report.sweep) by_regime[r.regime].push_back(r);
        for (const auto& [regime, rows] : by_regime)
            detail::write_file(outdir / ("curve_" + regime + ".svg"),
                               detail::svg_learning_curve(regime, rows));
    }
}

}  // namespace spcgan
