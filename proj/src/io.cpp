#include "nplmc/io.hpp"

#include "nplmc/error.hpp"

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <charconv>
#include <fstream>
#include <limits>
#include <sstream>

namespace nplmc::io {

std::string money(double x) {
    return fmt::format("{:.2f}", x);
}

void write_text(const std::filesystem::path &path, const std::string &text) {
    std::error_code ec;
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path(), ec);
        if (ec) {
            throw Error("cannot create directory " + path.parent_path().string() + ": " + ec.message());
        }
    }
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    f << text;
    f.close();
    if (!f) {
        throw Error("cannot write " + path.string());
    }
}

std::string read_text(const std::filesystem::path &path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) {
        throw Error("cannot read " + path.string());
    }
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

namespace {

std::vector<std::string> split(const std::string &line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) {
        out.push_back(cell);
    }
    if (!line.empty() && line.back() == ',') {
        out.emplace_back();
    }
    return out;
}

std::vector<std::vector<std::string>> rows(const std::string &text, const std::string &header) {
    std::istringstream ss(text);
    std::string line;
    if (!std::getline(ss, line)) {
        throw ValidationError("empty CSV");
    }
    if (!line.empty() && line.back() == '\r') {
        line.pop_back();
    }
    if (line != header) {
        throw ValidationError("unexpected CSV header '" + line + "', expected '" + header + "'");
    }
    const auto width = split(header).size();
    std::vector<std::vector<std::string>> out;
    std::size_t lineno = 1;
    while (std::getline(ss, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        auto cells = split(line);
        if (cells.size() != width) {
            throw ValidationError("CSV line " + std::to_string(lineno) + " has " +
                                  std::to_string(cells.size()) + " fields");
        }
        out.push_back(std::move(cells));
    }
    return out;
}

double to_double(const std::string &s) {
    double v = 0.0;
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc{} || r.ptr != s.data() + s.size()) {
        throw ValidationError("not a number: '" + s + "'");
    }
    return v;
}

long long to_int(const std::string &s) {
    long long v = 0;
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc{} || r.ptr != s.data() + s.size()) {
        throw ValidationError("not an integer: '" + s + "'");
    }
    return v;
}

// Shortest representation that reads back to the same double.
std::string exact(double x) {
    return fmt::format("{}", x);
}

} // namespace

std::string population_csv(const Population &pop) {
    fmt::memory_buffer b;
    fmt::format_to(std::back_inserter(b), "id,balance,credit_score,segment,eligible,paid_last_month,portfolio\n");
    for (const auto &a : pop.accounts) {
        fmt::format_to(std::back_inserter(b), "{},{},{},{},{},{},{}\n", a.id, exact(a.balance),
                       exact(a.credit_score), segment_number(a.segment), a.eligible ? 1 : 0,
                       a.paid_last_month ? 1 : 0, pop.portfolio_of[a.id]);
    }
    return fmt::to_string(b);
}

Population population_from_csv(const std::string &text) {
    const auto table = rows(text, "id,balance,credit_score,segment,eligible,paid_last_month,portfolio");
    Population pop;
    std::size_t portfolios = 0;
    for (std::size_t r = 0; r < table.size(); ++r) {
        const auto &c = table[r];
        Account a;
        if (to_int(c[0]) != static_cast<long long>(r)) {
            throw ValidationError("population CSV ids must be 0, 1, 2, ... in order");
        }
        a.id = static_cast<AccountId>(r);
        a.balance = to_double(c[1]);
        a.credit_score = to_double(c[2]);
        a.segment = segment_from_number(static_cast<int>(to_int(c[3])));
        a.eligible = to_int(c[4]) != 0;
        a.paid_last_month = to_int(c[5]) != 0;
        const auto p = to_int(c[6]);
        if (p < 0) {
            throw ValidationError("negative portfolio index");
        }
        pop.accounts.push_back(a);
        pop.portfolio_of.push_back(static_cast<std::uint32_t>(p));
        portfolios = std::max(portfolios, static_cast<std::size_t>(p) + 1);
    }
    if (pop.accounts.empty()) {
        throw ValidationError("population CSV has no accounts");
    }
    pop.params.n = pop.accounts.size();
    pop.rebuild_index(portfolios);
    return pop;
}

std::string plan_csv(const Population &pop, const IntegerPlan &plan, const RealPlan *real) {
    fmt::memory_buffer b;
    fmt::format_to(std::back_inserter(b), "unit_id,kind,portfolio,count_real,count_int\n");
    for (std::size_t j = 0; j < plan.portfolios.size(); ++j) {
        const auto &p = plan.portfolios[j];
        for (std::size_t i = 0; i < p.independent.size(); ++i) {
            const double rc = real ? real->portfolios[j].independent[i] : p.independent[i];
            fmt::format_to(std::back_inserter(b), "{},independent,{},{},{}\n",
                           pop.portfolios[j].independent_ids[i], j, exact(rc), p.independent[i]);
        }
        if (p.block_size > 0) {
            const double rc = real ? real->portfolios[j].block : p.block;
            fmt::format_to(std::back_inserter(b), "{},block,{},{},{}\n", j, j, exact(rc), p.block);
        }
    }
    return fmt::to_string(b);
}

IntegerPlan plan_from_csv(const std::string &text, const Population &pop) {
    const auto table = rows(text, "unit_id,kind,portfolio,count_real,count_int");
    IntegerPlan plan;
    std::vector<std::vector<bool>> seen(pop.portfolios.size());
    for (std::size_t j = 0; j < pop.portfolios.size(); ++j) {
        PortfolioCounts<std::uint32_t> c;
        c.independent.assign(pop.portfolios[j].independent_ids.size(), 0);
        c.block_size = pop.portfolios[j].dependent_ids.size();
        plan.portfolios.push_back(std::move(c));
    }
    // position of each account inside its portfolio's independent list
    std::vector<std::size_t> position(pop.size(), std::numeric_limits<std::size_t>::max());
    for (const auto &idx : pop.portfolios) {
        for (std::size_t i = 0; i < idx.independent_ids.size(); ++i) {
            position[idx.independent_ids[i]] = i;
        }
    }
    for (const auto &c : table) {
        const auto unit = to_int(c[0]);
        const auto j = to_int(c[2]);
        const auto count = to_int(c[4]);
        if (j < 0 || static_cast<std::size_t>(j) >= pop.portfolios.size() || count < 0 ||
            count > std::numeric_limits<std::uint32_t>::max()) {
            throw ValidationError("plan CSV row out of range");
        }
        auto &p = plan.portfolios[static_cast<std::size_t>(j)];
        if (c[1] == "block") {
            p.block = static_cast<std::uint32_t>(count);
        } else if (c[1] == "independent") {
            if (unit < 0 || static_cast<std::size_t>(unit) >= pop.size() ||
                pop.portfolio_of[static_cast<std::size_t>(unit)] != j ||
                position[static_cast<std::size_t>(unit)] == std::numeric_limits<std::size_t>::max()) {
                throw ValidationError("plan CSV: account " + c[0] + " is not independent in portfolio " + c[2]);
            }
            p.independent[position[static_cast<std::size_t>(unit)]] = static_cast<std::uint32_t>(count);
        } else {
            throw ValidationError("plan CSV: unknown unit kind '" + c[1] + "'");
        }
    }
    validate_plan(pop, plan);
    return plan;
}

std::string totals_csv(const Population &pop, const SimulationOutput &out) {
    fmt::memory_buffer b;
    fmt::format_to(std::back_inserter(b), "account_id,realisation,total\n");
    for (std::size_t j = 0; j < out.portfolios.size(); ++j) {
        const auto &po = out.portfolios[j];
        const auto &idx = pop.portfolios[j];
        for (std::size_t i = 0; i < po.independent_totals.size(); ++i) {
            for (std::size_t k = 0; k < po.independent_totals[i].size(); ++k) {
                fmt::format_to(std::back_inserter(b), "{},{},{}\n", idx.independent_ids[i], k,
                               money(po.independent_totals[i][k]));
            }
        }
        for (std::size_t m = 0; m < po.member_totals.size(); ++m) {
            for (std::size_t k = 0; k < po.member_totals[m].size(); ++k) {
                fmt::format_to(std::back_inserter(b), "{},{},{}\n", idx.dependent_ids[m], k,
                               money(po.member_totals[m][k]));
            }
        }
    }
    return fmt::to_string(b);
}

std::string monthly_csv(const Population &pop, const SimulationOutput &out) {
    if (out.detail != MonthlyDetail::paths) {
        throw PreconditionError("monthly CSV needs a run that kept every path");
    }
    const auto h = static_cast<std::size_t>(out.horizon);
    fmt::memory_buffer b;
    fmt::format_to(std::back_inserter(b), "account_id,realisation,month,collections\n");
    const auto emit = [&](AccountId id, const std::vector<double> &paths) {
        for (std::size_t k = 0; k * h < paths.size(); ++k) {
            for (std::size_t t = 0; t < h; ++t) {
                fmt::format_to(std::back_inserter(b), "{},{},{},{}\n", id, k, t + 1, money(paths[k * h + t]));
            }
        }
    };
    for (std::size_t j = 0; j < out.portfolios.size(); ++j) {
        const auto &po = out.portfolios[j];
        for (std::size_t i = 0; i < po.independent_paths.size(); ++i) {
            emit(pop.portfolios[j].independent_ids[i], po.independent_paths[i]);
        }
        for (std::size_t m = 0; m < po.member_paths.size(); ++m) {
            emit(pop.portfolios[j].dependent_ids[m], po.member_paths[m]);
        }
    }
    return fmt::to_string(b);
}

std::string curve_csv(const std::vector<double> &mean, const std::vector<PredictionInterval> *bands) {
    fmt::memory_buffer b;
    fmt::format_to(std::back_inserter(b), "month,mean,lower,upper\n");
    for (std::size_t t = 0; t < mean.size(); ++t) {
        if (bands) {
            fmt::format_to(std::back_inserter(b), "{},{},{},{}\n", t + 1, money(mean[t]),
                           money((*bands)[t].lower()), money((*bands)[t].upper()));
        } else {
            fmt::format_to(std::back_inserter(b), "{},{},,\n", t + 1, money(mean[t]));
        }
    }
    return fmt::to_string(b);
}

std::string design_csv(const SlicedDesign &design) {
    fmt::memory_buffer b;
    fmt::format_to(std::back_inserter(b), "slice,segment,y0,b_tilde,c_tilde\n");
    for (const auto &p : design.points) {
        fmt::format_to(std::back_inserter(b), "{},{},{},{},{}\n", slice_of(p.segment, p.paid_prev),
                       segment_number(p.segment), p.paid_prev ? 1 : 0, exact(p.b_tilde), exact(p.c_tilde));
    }
    return fmt::to_string(b);
}

std::string training_csv(const TrainingData &data) {
    fmt::memory_buffer b;
    fmt::format_to(std::back_inserter(b), "b_tilde,c_tilde,segment,y0,log_var,kurtosis,noise_var\n");
    for (const auto &o : data.observations) {
        fmt::format_to(std::back_inserter(b), "{},{},{},{},{},{},{}\n", exact(o.point.b_tilde),
                       exact(o.point.c_tilde), segment_number(o.point.segment), o.point.paid_prev ? 1 : 0,
                       exact(o.log_variance), exact(o.kurtosis), exact(o.noise_variance));
    }
    return fmt::to_string(b);
}

ConstrainedProblem problem_from_json(const std::string &text) {
    using nlohmann::json;
    try {
        const auto doc = json::parse(text);
        ConstrainedProblem p;
        p.allocation.budget = doc.at("budget").get<double>();
        for (const auto &q : doc.at("portfolios")) {
            PortfolioSigmas s;
            s.independent = q.value("sigma", std::vector<double>{});
            s.block = q.value("block_sigma", 0.0);
            s.block_size = q.value("block_size", std::size_t{0});
            p.allocation.portfolios.push_back(std::move(s));
            const auto cap = q.find("cap");
            p.caps.push_back(cap == q.end() || cap->is_null() ? std::numeric_limits<double>::infinity()
                                                               : cap->get<double>());
        }
        p.validate();
        return p;
    } catch (const json::exception &e) {
        throw ValidationError(std::string("malformed problem document: ") + e.what());
    }
}

} // namespace nplmc::io
