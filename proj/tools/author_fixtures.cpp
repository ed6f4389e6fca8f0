// Regenerates the replay fixtures under tests/data from hand-written oracle
// answers. Run it after changing a prompt template or a fixture script:
//
//   unidomain_author <repo>/tests/data [fusion|kitchen|learn]...
//
// Every transcript is recorded against a scripted backend, then its latencies
// are replaced by a deterministic function of the response size so reruns
// produce byte-identical files.

#include "unidomain/domain_learn.hpp"
#include "unidomain/eval.hpp"
#include "unidomain/fusion.hpp"
#include "unidomain/keyframes.hpp"
#include "unidomain/task_plan.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <regex>
#include <set>

using namespace unidomain;
namespace fs = std::filesystem;

namespace {

void write_text(const fs::path &path, const std::string &text) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw Error("cannot write " + path.string());
    out << text;
}

void normalize_latencies(const fs::path &transcript) {
    std::istringstream in(pddl::read_text(transcript));
    std::string line, out;
    while (std::getline(in, line)) {
        if (line.empty())
            continue;
        auto doc = nlohmann::json::parse(line);
        double size = static_cast<double>(doc["response"].dump().size());
        doc["latency_s"] = std::round((0.4 + size / 2000.0) * 1000.0) / 1000.0;
        out += doc.dump() + "\n";
    }
    write_text(transcript, out);
}

std::unique_ptr<oracle::OracleClient> recorder(const fs::path &transcript, oracle::ScriptedBackend::Responder r) {
    fs::remove(transcript);
    oracle::OracleConfig cfg{oracle::Mode::record, {}, "gpt-4.1", "stub", transcript, 1};
    return std::make_unique<oracle::OracleClient>(cfg, std::make_shared<oracle::ScriptedBackend>(std::move(r)));
}

std::string user_text(const oracle::ChatRequest &r) { return r.messages.back().parts.front().text; }

// Fusion ----------------------------------------------------------------------

// Answers YES when both names sit in one synonym group or are equal.
struct SynonymTable {
    std::map<std::string, std::size_t> group;

    explicit SynonymTable(const fs::path &path) {
        auto doc = nlohmann::json::parse(pddl::read_text(path));
        std::size_t id = 0;
        for (const auto &g : doc.at("groups")) {
            for (const auto &name : g)
                group[name.get<std::string>()] = id;
            ++id;
        }
    }

    static std::string head(const std::string &text, const std::string &marker) {
        std::smatch m;
        std::regex re(marker + "([a-z0-9_\\-]+)");
        if (!std::regex_search(text, m, re))
            throw Error("equivalence prompt without '" + marker + "'");
        return m[1];
    }

    std::string operator()(const oracle::ChatRequest &r) const {
        const std::string text = user_text(r);
        std::string a = head(text, "\nA: "), b = head(text, "\nB: ");
        if (a == b)
            return "YES";
        auto ia = group.find(a), ib = group.find(b);
        return ia != group.end() && ib != group.end() && ia->second == ib->second ? "YES" : "NO";
    }
};

nlohmann::json counts(const fusion::FuseAllResult &r, const oracle::OracleSession &s) {
    return {{"predicates", r.domain.predicates.size()},
            {"operators", r.domain.operators.size()},
            {"types", r.domain.types.size()},
            {"merges", r.log.records.size()},
            {"llm_calls", s.usage().n_calls}};
}

void author_fusion(const fs::path &data) {
    const fs::path dir = data / "atomic";
    SynonymTable table(dir / "equivalences.json");
    auto client = recorder(dir / "transcript.jsonl", [&](const oracle::ChatRequest &r) { return table(r); });
    fusion::FusionConfig cfg;
    cfg.parallel = false;

    oracle::OracleSession ks(*client);
    auto kitchen = fusion::fuse_all(ks, fusion::load_domain_list(dir / "kitchen.txt"), cfg, "kitchen");
    oracle::OracleSession as(*client);
    auto all = fusion::fuse_all(as, fusion::load_domain_list(dir / "all.txt"), cfg, "household");

    write_text(data / "kitchen" / "domain.pddl", pddl::print_domain(kitchen.domain));
    write_text(dir / "household.pddl", pddl::print_domain(all.domain));
    nlohmann::json expected{{"kitchen", counts(kitchen, ks)}, {"household", counts(all, as)}};
    write_text(dir / "expected.json", expected.dump(2) + "\n");
    normalize_latencies(dir / "transcript.jsonl");
    std::cout << "fusion: " << expected.dump() << "\n";
}

// Kitchen tasks ----------------------------------------------------------------

// A flat scene picture: one colored bar per object, positions from the task id.
keyframes::RgbImage scene(const std::string &seed, std::size_t n_objects) {
    keyframes::RgbImage img{64, 48, std::vector<std::uint8_t>(64 * 48 * 3, 200)};
    std::uint32_t h = 2166136261u;
    for (char c : seed)
        h = (h ^ static_cast<std::uint8_t>(c)) * 16777619u;
    for (std::size_t k = 0; k < n_objects; ++k) {
        h = h * 1664525u + 1013904223u;
        std::size_t x0 = (h >> 8) % 56, y0 = (h >> 16) % 40;
        std::uint8_t rgb[3] = {static_cast<std::uint8_t>(h), static_cast<std::uint8_t>(h >> 5),
                               static_cast<std::uint8_t>(h >> 11)};
        for (std::size_t y = y0; y < y0 + 8; ++y)
            for (std::size_t x = x0; x < x0 + 8; ++x)
                for (int c = 0; c < 3; ++c)
                    img.pixels[(y * img.width + x) * 3 + c] = rgb[c];
    }
    return img;
}

void author_kitchen(const fs::path &data) {
    const fs::path dir = data / "kitchen";
    const pddl::Domain dom = pddl::load_domain(dir / "domain.pddl");
    auto tasks = eval::load_suite(dir / "suite.json");
    std::map<std::string, std::string> by_instruction;
    for (const auto &t : tasks) {
        by_instruction[t.instruction] = t.id;
        auto gt = pddl::load_problem(*t.gt_problem, dom);
        keyframes::write_ppm(t.image, scene(t.id, gt.objects.size()));
    }
    const std::string groups = pddl::read_text(dir / "script" / "groups.json");
    auto respond = [&](const oracle::ChatRequest &r) -> std::string {
        const std::string text = r.messages[1].parts.front().text;
        if (text.find("Sort each predicate") != std::string::npos)
            return groups;
        std::smatch m;
        if (!std::regex_search(text, m, std::regex("Task instruction: ([^\n]*)")))
            throw Error("unexpected prompt: " + text.substr(0, 80));
        const std::string &id = by_instruction.at(m[1]);
        bool refined = text.find("Only the part of the planning domain") != std::string::npos;
        return "```pddl\n" + pddl::read_text(dir / "script" / (id + (refined ? "_refined.pddl" : "_initial.pddl"))) +
               "```";
    };
    auto client = recorder(dir / "transcript.jsonl", respond);
    eval::SuiteConfig cfg;
    cfg.parallelism = 1;
    auto result = eval::run_suite(*client, dom, tasks, cfg);
    for (const auto &e : result.episodes)
        if (!e.success || !e.optimal || e.cost != *e.optimal)
            throw Error("kitchen task " + e.task_id + " is not solved optimally: " + e.error);
    normalize_latencies(dir / "transcript.jsonl");
    std::cout << "kitchen: " << result.episodes.size() << " tasks, " << client->transcript().size() << " records\n";
}

// Learning demos ---------------------------------------------------------------

const char *kLearnTypes = "(:types drawer item)";
const char *kLearnPredicates =
    "(:predicates (drawer_open ?d - drawer) (unlocked ?d - drawer) (in_drawer ?i - item ?d - drawer) "
    "(holding ?i - item) (hand_empty))";
const char *kOpenDrawer = "(:action open_drawer :parameters (?d - drawer) :precondition (and (not (drawer_open ?d)) "
                          "(hand_empty)) :effect (drawer_open ?d))";

std::string learn_domain(bool needs_unlock) {
    std::string take = std::string("(:action take_out :parameters (?i - item ?d - drawer) :precondition (and "
                                   "(drawer_open ?d) (in_drawer ?i ?d) (hand_empty)") +
                       (needs_unlock ? " (unlocked ?d)" : "") +
                       ") :effect (and (holding ?i) (not (in_drawer ?i ?d)) (not (hand_empty))))";
    return std::string("(define (domain drawer_demo)\n  (:requirements :strips :typing :negative-preconditions)\n  ") +
           kLearnTypes + "\n  " + kLearnPredicates + "\n  " + kOpenDrawer + "\n  " + take + ")\n";
}

// Learned domains are named after their demo. Test problem i (1-based) opens the drawer when i <= solved, otherwise it needs
// the towel, which the locked variant of take_out never yields.
std::string learn_problem(const std::string &domain, int i, int solved) {
    std::string goal = i <= solved ? "(drawer_open d1)" : "(holding towel)";
    return "(define (problem test_" + std::to_string(i) +
           ") (:domain " + domain + ") (:objects d1 - drawer towel - item) (:init (hand_empty) (in_drawer towel d1)) "
           "(:goal " +
           goal + "))";
}

void author_learn(const fs::path &data) {
    const fs::path dir = data / "learn";
    struct Demo {
        std::string id;
        int solved;
        bool learnable;
    };
    std::vector<Demo> demos;
    for (int k = 0; k <= 5; ++k)
        demos.push_back({"s" + std::to_string(k), k, true});
    demos.push_back({"stuck", 0, false});

    std::map<std::string, Demo> by_id;
    nlohmann::json index = nlohmann::json::array();
    for (const auto &d : demos) {
        by_id[d.id] = d;
        nlohmann::json manifest{{"demo_id", d.id},
                                {"instruction", "Take the towel out of the drawer (scene " + d.id + ")."},
                                {"keyframes", {"kf_0.pgm", "kf_1.pgm"}}};
        for (int f = 0; f < 2; ++f) {
            keyframes::GrayFrame frame{8, 6, std::vector<std::uint8_t>(48)};
            for (std::size_t p = 0; p < frame.pixels.size(); ++p)
                frame.pixels[p] = static_cast<std::uint8_t>((p * 7 + f * 90 + d.solved * 13 + d.id.size()) % 256);
            fs::create_directories(dir / d.id);
            keyframes::write_pgm(dir / d.id / ("kf_" + std::to_string(f) + ".pgm"), frame);
        }
        write_text(dir / d.id / "manifest.json", manifest.dump(2) + "\n");
        index.push_back({{"manifest", d.id + "/manifest.json"}, {"solved", d.solved}, {"learnable", d.learnable}});
    }
    write_text(dir / "fixtures.json", index.dump(2) + "\n");

    auto respond = [&](const oracle::ChatRequest &r) -> std::string {
        const std::string text = r.messages[1].parts.front().text;
        std::smatch m;
        if (!std::regex_search(text, m, std::regex("\\(scene (\\w+)\\)")))
            throw Error("unexpected prompt: " + text.substr(0, 80));
        const Demo &d = by_id.at(m[1]);
        const std::string last = user_text(r);
        if (last.find("Identify the single robot action") != std::string::npos ||
            last.find("Revise it as a whole") != std::string::npos)
            return "```pddl\n" + learn_domain(true) + "```";
        if (last.find("did not pass a check") != std::string::npos)
            return learn_domain(!d.learnable);
        if (std::regex_search(last, m, std::regex("Write test problem (\\d+) of")))
            return learn_problem(d.id, std::stoi(m[1]), d.solved);
        if (last.find("Does this plan satisfy") != std::string::npos)
            return "PASS";
        throw Error("unexpected prompt: " + last.substr(0, 80));
    };
    auto client = recorder(dir / "transcript.jsonl", respond);
    for (const auto &d : demos) {
        oracle::OracleSession session(*client);
        auto manifest = learn::DemoManifest::load(dir / d.id / "manifest.json");
        try {
            auto rec = learn::learn_atomic_domain(session, manifest, {});
            std::cout << "learn " << d.id << ": S0=" << *rec.checks.front().solvability
                      << " checks=" << rec.checks.size() << "\n";
        } catch (const learn::LearnFailed &e) {
            std::cout << "learn " << d.id << ": failed after " << e.record().checks.size() << " checks\n";
        }
    }
    normalize_latencies(dir / "transcript.jsonl");
}

} // namespace

int main(int argc, char **argv) {
    if (argc < 2) {
        std::cerr << "usage: unidomain_author <tests/data> [fusion|kitchen|learn]...\n";
        return 2;
    }
    const fs::path data = argv[1];
    std::set<std::string> parts;
    for (int i = 2; i < argc; ++i)
        parts.insert(argv[i]);
    if (parts.empty())
        parts = {"fusion", "kitchen", "learn"};
    try {
        // The kitchen tasks solve against the domain the fusion step writes.
        if (parts.count("fusion"))
            author_fusion(data);
        if (parts.count("kitchen"))
            author_kitchen(data);
        if (parts.count("learn"))
            author_learn(data);
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
