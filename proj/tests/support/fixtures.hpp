#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace drp::test {

inline std::filesystem::path fixtures_dir() {
    return std::filesystem::path(DRP_FIXTURES_DIR);
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open fixture: " + path.string());
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

struct CorpusCase {
    std::string rel_path;
    bool well_formed = false;
    std::string text;
};

// Loads the 50-case extraction corpus listed in corpus_manifest.tsv
// (path <TAB> well_formed flag).
inline std::vector<CorpusCase> load_corpus() {
    std::vector<CorpusCase> cases;
    std::ifstream manifest(fixtures_dir() / "corpus_manifest.tsv");
    if (!manifest) {
        throw std::runtime_error("cannot open corpus_manifest.tsv");
    }
    std::string line;
    while (std::getline(manifest, line)) {
        if (line.empty()) continue;
        auto tab = line.find('\t');
        if (tab == std::string::npos) {
            throw std::runtime_error("malformed manifest line: " + line);
        }
        CorpusCase c;
        c.rel_path = line.substr(0, tab);
        c.well_formed = line.substr(tab + 1) == "1";
        c.text = read_file(fixtures_dir() / c.rel_path);
        cases.push_back(std::move(c));
    }
    return cases;
}

struct GoldenDigest {
    std::string label;
    std::string canonical;
    std::string digest;
};

inline std::vector<GoldenDigest> load_golden_digests() {
    std::vector<GoldenDigest> rows;
    std::ifstream in(fixtures_dir() / "golden" / "digests.tsv");
    if (!in) {
        throw std::runtime_error("cannot open golden/digests.tsv");
    }
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto t1 = line.find('\t');
        auto t2 = line.find('\t', t1 + 1);
        if (t1 == std::string::npos || t2 == std::string::npos) {
            throw std::runtime_error("malformed golden line: " + line);
        }
        rows.push_back(GoldenDigest{line.substr(0, t1), line.substr(t1 + 1, t2 - t1 - 1),
                                    line.substr(t2 + 1)});
    }
    return rows;
}

} // namespace drp::test
