// Time-stamped experiment trace and its CSV form.
#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace vivrl {

struct RunSample {
    double t_s = 0.0;
    double y_over_d = 0.0;
    double ydot_norm = 0.0;  ///< Ẏ / (f_n D)
    double duty = 0.0;
    double alpha = 0.0;      ///< Ω D / (2V)
    double reward = 0.0;
};

/// Uniformly sampled trace of one run (uncontrolled, controlled or swept).
struct RunRecord {
    double sample_interval_s = 0.1;
    std::vector<RunSample> samples;

    [[nodiscard]] bool empty() const { return samples.empty(); }
    [[nodiscard]] std::size_t size() const { return samples.size(); }

    [[nodiscard]] std::vector<double> y_over_d() const { return column(&RunSample::y_over_d); }
    [[nodiscard]] std::vector<double> alpha() const { return column(&RunSample::alpha); }
    [[nodiscard]] std::vector<double> duty() const { return column(&RunSample::duty); }
    [[nodiscard]] std::vector<double> reward() const { return column(&RunSample::reward); }

    /// Sub-record holding samples with t >= t_from.
    [[nodiscard]] RunRecord tail_from(double t_from) const {
        RunRecord out{sample_interval_s, {}};
        for (const auto &s : samples)
            if (s.t_s >= t_from - 1e-9) out.samples.push_back(s);
        return out;
    }

private:
    [[nodiscard]] std::vector<double> column(double RunSample::*field) const {
        std::vector<double> out;
        out.reserve(samples.size());
        for (const auto &s : samples) out.push_back(s.*field);
        return out;
    }
};

inline constexpr const char *kRunRecordCsvHeader = "t_s,y_over_d,ydot_norm,duty,alpha,reward";

/// Writes the CSV body (header + rows). Provenance comment lines are the caller's job.
inline void write_csv(std::ostream &os, const RunRecord &rec) {
    os << kRunRecordCsvHeader << '\n';
    os.precision(10);
    for (const auto &s : rec.samples) {
        os << s.t_s << ',' << s.y_over_d << ',' << s.ydot_norm << ',' << s.duty << ','
           << s.alpha << ',' << s.reward << '\n';
    }
}

}  // namespace vivrl
