#pragma once

#include <fstream>
#include <json.hpp>

#include "crossbid/core/hash.hpp"
#include "crossbid/core/io.hpp"
#include "crossbid/logs/schema.hpp"

namespace crossbid::logs {

using json = nlohmann::json;

constexpr std::uint32_t kDatasetFormatVersion = 1;

namespace detail_io {

inline json vec_to_json(const Vec& v) {
    return json(std::vector<double>(v.data(), v.data() + v.size()));
}

inline Vec vec_from_json(const json& j) {
    auto v = j.get<std::vector<double>>();
    return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline void check_schema(const std::string& got, const std::string& want,
                         const std::string& path) {
    CB_REQUIRE(got == want, "dataset schema/version mismatch in ", path, ": file declares '",
               got, "', reader expects '", want, "'");
}

/// Line-oriented reader that reports byte offsets on corrupt input.
class JsonlReader {
public:
    explicit JsonlReader(const std::string& path) : is_(path, std::ios::binary), path_(path) {
        CB_REQUIRE(is_.good(), "cannot open: ", path);
    }

    std::optional<json> next() {
        line_start_ = pos_;
        std::string line;
        if (!std::getline(is_, line)) return std::nullopt;
        pos_ += line.size() + 1;
        if (line.empty()) return next();
        try {
            return json::parse(line);
        } catch (const std::exception& e) {
            detail::raise("corrupt record in ", path_, " at byte offset ", line_start_, ": ",
                          e.what());
        }
    }

    std::size_t offset() const { return line_start_; }

private:
    std::ifstream is_;
    std::string path_;
    std::size_t pos_ = 0;
    std::size_t line_start_ = 0;
};

} // namespace detail_io

// ---------------------------------------------------------------------------
// top-level dataset

inline void save_top_jsonl(const TopDataset& ds, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    CB_REQUIRE(os.good(), "cannot open for writing: ", path);
    json head;
    head["schema"] = TopDataset::kSchema;
    head["format_version"] = kDatasetFormatVersion;
    head["config_hash"] = hash_hex(ds.config_hash);
    head["state_dim"] = ds.state_dim;
    head["channels"] = ds.channels;
    head["episode_days"] = ds.episode_days;
    head["count"] = ds.items.size();
    os << head.dump() << "\n";
    for (const auto& tr : ds.items) {
        json j;
        j["s"] = detail_io::vec_to_json(tr.s);
        j["b"] = detail_io::vec_to_json(tr.b);
        j["g"] = tr.g;
        j["s_next"] = detail_io::vec_to_json(tr.s_next);
        j["day"] = tr.day;
        j["advertiser"] = tr.advertiser;
        j["j"] = tr.day_in_episode;
        j["terminal"] = tr.terminal;
        j["budget"] = tr.budget;
        j["aimcpc"] = tr.cpc_target;
        j["gen_tier"] = tr.gen_tier;
        j["outcome_tier"] = tr.outcome_tier;
        os << j.dump() << "\n";
    }
    CB_REQUIRE(os.good(), "write failure on ", path);
}

inline void save_top_binary(const TopDataset& ds, const std::string& path) {
    BinWriter w(path);
    w.raw("CBDS", 4);
    w.u32(kDatasetFormatVersion);
    w.str(TopDataset::kSchema);
    w.u64(ds.config_hash);
    w.i64(ds.state_dim);
    w.i64(ds.channels);
    w.i64(ds.episode_days);
    w.u64(ds.items.size());
    // columnar blocks
    const auto n = ds.items.size();
    std::vector<double> buf;
    buf.reserve(n * static_cast<std::size_t>(ds.state_dim));
    for (const auto& t : ds.items) buf.insert(buf.end(), t.s.data(), t.s.data() + t.s.size());
    w.f64s(buf);
    buf.clear();
    for (const auto& t : ds.items) buf.insert(buf.end(), t.b.data(), t.b.data() + t.b.size());
    w.f64s(buf);
    buf.clear();
    for (const auto& t : ds.items)
        buf.insert(buf.end(), t.s_next.data(), t.s_next.data() + t.s_next.size());
    w.f64s(buf);
    buf.clear();
    for (const auto& t : ds.items) {
        buf.push_back(t.g);
        buf.push_back(static_cast<double>(t.day));
        buf.push_back(static_cast<double>(t.advertiser));
        buf.push_back(static_cast<double>(t.day_in_episode));
        buf.push_back(t.terminal ? 1.0 : 0.0);
        buf.push_back(t.budget);
        buf.push_back(t.cpc_target);
        buf.push_back(static_cast<double>(t.gen_tier));
        buf.push_back(static_cast<double>(t.outcome_tier));
    }
    w.f64s(buf);
    w.close();
}

inline TopDataset load_top(const std::string& path) {
    std::ifstream probe(path, std::ios::binary);
    CB_REQUIRE(probe.good(), "cannot open: ", path);
    char c0 = 0;
    probe.get(c0);
    probe.close();
    TopDataset ds;
    if (c0 == '{') {
        detail_io::JsonlReader r(path);
        auto head = r.next();
        CB_REQUIRE(head.has_value(), "empty dataset file: ", path);
        detail_io::check_schema(head->value("schema", ""), TopDataset::kSchema, path);
        CB_REQUIRE(head->value("format_version", 0u) == kDatasetFormatVersion,
                   "dataset format version mismatch in ", path);
        ds.state_dim = head->at("state_dim").get<int>();
        ds.channels = head->at("channels").get<int>();
        ds.episode_days = head->at("episode_days").get<int>();
        ds.config_hash = std::stoull(head->at("config_hash").get<std::string>(), nullptr, 16);
        const auto count = head->at("count").get<std::size_t>();
        while (auto j = r.next()) {
            TopTransition t;
            t.s = detail_io::vec_from_json(j->at("s"));
            t.b = detail_io::vec_from_json(j->at("b"));
            t.g = j->at("g").get<double>();
            t.s_next = detail_io::vec_from_json(j->at("s_next"));
            t.day = j->at("day").get<long>();
            t.advertiser = j->at("advertiser").get<int>();
            t.day_in_episode = j->at("j").get<int>();
            t.terminal = j->at("terminal").get<bool>();
            t.budget = j->at("budget").get<double>();
            t.cpc_target = j->at("aimcpc").get<double>();
            t.gen_tier = j->at("gen_tier").get<int>();
            t.outcome_tier = j->at("outcome_tier").get<int>();
            ds.items.push_back(std::move(t));
        }
        CB_REQUIRE(ds.items.size() == count, "truncated dataset ", path, ": header declares ",
                   count, " records, found ", ds.items.size(), " (at byte offset ", r.offset(),
                   ")");
        return ds;
    }
    BinReader r(path);
    char magic[4];
    r.raw(magic, 4);
    CB_REQUIRE(std::string(magic, 4) == "CBDS", "not a dataset file: ", path);
    CB_REQUIRE(r.u32() == kDatasetFormatVersion, "dataset format version mismatch in ", path);
    detail_io::check_schema(r.str(), TopDataset::kSchema, path);
    ds.config_hash = r.u64();
    ds.state_dim = static_cast<int>(r.i64());
    ds.channels = static_cast<int>(r.i64());
    ds.episode_days = static_cast<int>(r.i64());
    const auto n = r.u64();
    auto s_all = r.f64s();
    auto b_all = r.f64s();
    auto sn_all = r.f64s();
    auto misc = r.f64s();
    CB_REQUIRE(s_all.size() == n * ds.state_dim && b_all.size() == n * ds.channels &&
                   sn_all.size() == n * ds.state_dim && misc.size() == n * 9,
               "corrupt dataset blocks in ", path);
    ds.items.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        TopTransition& t = ds.items[i];
        t.s = Eigen::Map<const Vec>(s_all.data() + i * ds.state_dim, ds.state_dim);
        t.b = Eigen::Map<const Vec>(b_all.data() + i * ds.channels, ds.channels);
        t.s_next = Eigen::Map<const Vec>(sn_all.data() + i * ds.state_dim, ds.state_dim);
        const double* m = misc.data() + i * 9;
        t.g = m[0];
        t.day = static_cast<long>(m[1]);
        t.advertiser = static_cast<int>(m[2]);
        t.day_in_episode = static_cast<int>(m[3]);
        t.terminal = m[4] != 0.0;
        t.budget = m[5];
        t.cpc_target = m[6];
        t.gen_tier = static_cast<int>(m[7]);
        t.outcome_tier = static_cast<int>(m[8]);
    }
    return ds;
}

// ---------------------------------------------------------------------------
// bottom-level dataset

inline void save_bottom_jsonl(const BottomDataset& ds, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    CB_REQUIRE(os.good(), "cannot open for writing: ", path);
    json head;
    head["schema"] = BottomDataset::kSchema;
    head["format_version"] = kDatasetFormatVersion;
    head["config_hash"] = hash_hex(ds.config_hash);
    head["channels"] = ds.channels;
    head["obs_dim"] = ds.obs_dim;
    head["count"] = ds.items.size();
    os << head.dump() << "\n";
    for (const auto& tr : ds.items) {
        json j;
        j["day"] = tr.day;
        j["advertiser"] = tr.advertiser;
        j["gen_tier"] = tr.gen_tier;
        j["outcome_tier"] = tr.outcome_tier;
        j["day_start_obs"] = json::array();
        for (const auto& o : tr.day_start_obs) j["day_start_obs"].push_back(detail_io::vec_to_json(o));
        j["pvid"] = tr.channel;
        j["obs"] = json::array();
        for (const auto& o : tr.obs) j["obs"].push_back(detail_io::vec_to_json(o));
        j["a"] = tr.action;
        j["r"] = tr.reward;
        j["request_index"] = tr.global_index;
        os << j.dump() << "\n";
    }
    CB_REQUIRE(os.good(), "write failure on ", path);
}

inline void save_bottom_binary(const BottomDataset& ds, const std::string& path) {
    BinWriter w(path);
    w.raw("CBDS", 4);
    w.u32(kDatasetFormatVersion);
    w.str(BottomDataset::kSchema);
    w.u64(ds.config_hash);
    w.i64(ds.channels);
    w.i64(ds.obs_dim);
    w.u64(ds.items.size());
    for (const auto& tr : ds.items) {
        w.i64(tr.day);
        w.i64(tr.advertiser);
        w.i64(tr.gen_tier);
        w.i64(tr.outcome_tier);
        w.u64(tr.length());
        std::vector<double> buf;
        for (const auto& o : tr.day_start_obs) buf.insert(buf.end(), o.data(), o.data() + o.size());
        w.f64s(buf);
        buf.assign(tr.channel.begin(), tr.channel.end());
        w.f64s(buf);
        buf.clear();
        for (const auto& o : tr.obs) buf.insert(buf.end(), o.data(), o.data() + o.size());
        w.f64s(buf);
        w.f64s(tr.action);
        w.f64s(tr.reward);
        buf.assign(tr.global_index.begin(), tr.global_index.end());
        w.f64s(buf);
    }
    w.close();
}

inline BottomDataset load_bottom(const std::string& path) {
    std::ifstream probe(path, std::ios::binary);
    CB_REQUIRE(probe.good(), "cannot open: ", path);
    char c0 = 0;
    probe.get(c0);
    probe.close();
    BottomDataset ds;
    if (c0 == '{') {
        detail_io::JsonlReader r(path);
        auto head = r.next();
        CB_REQUIRE(head.has_value(), "empty dataset file: ", path);
        detail_io::check_schema(head->value("schema", ""), BottomDataset::kSchema, path);
        CB_REQUIRE(head->value("format_version", 0u) == kDatasetFormatVersion,
                   "dataset format version mismatch in ", path);
        ds.channels = head->at("channels").get<int>();
        ds.obs_dim = head->at("obs_dim").get<int>();
        ds.config_hash = std::stoull(head->at("config_hash").get<std::string>(), nullptr, 16);
        const auto count = head->at("count").get<std::size_t>();
        while (auto j = r.next()) {
            BottomTrajectory t;
            t.day = j->at("day").get<long>();
            t.advertiser = j->at("advertiser").get<int>();
            t.gen_tier = j->at("gen_tier").get<int>();
            t.outcome_tier = j->at("outcome_tier").get<int>();
            for (const auto& o : j->at("day_start_obs")) t.day_start_obs.push_back(detail_io::vec_from_json(o));
            t.channel = j->at("pvid").get<std::vector<int>>();
            for (const auto& o : j->at("obs")) t.obs.push_back(detail_io::vec_from_json(o));
            t.action = j->at("a").get<std::vector<double>>();
            t.reward = j->at("r").get<std::vector<double>>();
            t.global_index = j->at("request_index").get<std::vector<long>>();
            ds.items.push_back(std::move(t));
        }
        CB_REQUIRE(ds.items.size() == count, "truncated dataset ", path, ": header declares ",
                   count, " records, found ", ds.items.size(), " (at byte offset ", r.offset(),
                   ")");
        return ds;
    }
    BinReader r(path);
    char magic[4];
    r.raw(magic, 4);
    CB_REQUIRE(std::string(magic, 4) == "CBDS", "not a dataset file: ", path);
    CB_REQUIRE(r.u32() == kDatasetFormatVersion, "dataset format version mismatch in ", path);
    detail_io::check_schema(r.str(), BottomDataset::kSchema, path);
    ds.config_hash = r.u64();
    ds.channels = static_cast<int>(r.i64());
    ds.obs_dim = static_cast<int>(r.i64());
    const auto n = r.u64();
    for (std::size_t i = 0; i < n; ++i) {
        BottomTrajectory t;
        t.day = static_cast<long>(r.i64());
        t.advertiser = static_cast<int>(r.i64());
        t.gen_tier = static_cast<int>(r.i64());
        t.outcome_tier = static_cast<int>(r.i64());
        const auto len = r.u64();
        auto ds_obs = r.f64s();
        CB_REQUIRE(ds_obs.size() == static_cast<std::size_t>(ds.channels * ds.obs_dim),
                   "corrupt day_start_obs block in ", path, " at byte offset ", r.offset());
        for (int p = 0; p < ds.channels; ++p)
            t.day_start_obs.push_back(
                Eigen::Map<const Vec>(ds_obs.data() + p * ds.obs_dim, ds.obs_dim));
        auto chan = r.f64s();
        auto obs = r.f64s();
        t.action = r.f64s();
        t.reward = r.f64s();
        auto gidx = r.f64s();
        CB_REQUIRE(chan.size() == len && obs.size() == len * ds.obs_dim &&
                       t.action.size() == len && t.reward.size() == len && gidx.size() == len,
                   "corrupt trajectory blocks in ", path, " at byte offset ", r.offset());
        for (std::size_t k = 0; k < len; ++k) {
            t.channel.push_back(static_cast<int>(chan[k]));
            t.obs.push_back(Eigen::Map<const Vec>(obs.data() + k * ds.obs_dim, ds.obs_dim));
            t.global_index.push_back(static_cast<long>(gidx[k]));
        }
        ds.items.push_back(std::move(t));
    }
    return ds;
}

// ---------------------------------------------------------------------------
// raw event log (production field names)

inline void save_events_jsonl(const RunLog& log, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    CB_REQUIRE(os.good(), "cannot open for writing: ", path);
    json head;
    head["schema"] = "crossbid.events.v1";
    head["format_version"] = kDatasetFormatVersion;
    head["config_hash"] = hash_hex(log.world.hash());
    head["count"] = log.events.size();
    os << head.dump() << "\n";
    for (const auto& ev : log.events) {
        json j;
        j["dt"] = ev.day;
        j["pvid"] = ev.pvid;
        j["request_time"] = ev.request_time;
        j["user_pref"] = detail_io::vec_to_json(ev.user_pref);
        j["winner"] = ev.winner;
        j["final_charge"] = ev.price;
        j["ctr"] = ev.ctr;
        j["histctr"] = ev.histctr;
        j["cpc"] = ev.cpc;
        j["aimcpc"] = ev.aimcpc;
        j["impr"] = ev.impr;
        j["clicks"] = ev.clicks;
        j["revenue"] = ev.revenue;
        j["budget"] = ev.budget;
        for (int w = 0; w < 4; ++w) {
            const std::string suffix = "_before" + std::to_string(w + 1) + "week";
            j["impr" + suffix] = ev.impr_before_week[w];
            j["click" + suffix] = ev.click_before_week[w];
            j["cpc" + suffix] = ev.cpc_before_week[w];
        }
        json bids = json::array();
        for (const auto& br : ev.bids) {
            json b;
            b["advertiser"] = br.advertiser;
            b["obs"] = detail_io::vec_to_json(br.obs);
            b["a"] = br.ratio;
            b["bid"] = br.bid;
            b["entered"] = br.entered;
            b["won"] = br.won;
            b["final_charge"] = br.final_charge;
            b["clicks"] = br.clicks;
            b["revenue"] = br.revenue;
            b["r"] = br.reward;
            bids.push_back(std::move(b));
        }
        j["bids"] = std::move(bids);
        os << j.dump() << "\n";
    }
    CB_REQUIRE(os.good(), "write failure on ", path);
}

} // namespace crossbid::logs
