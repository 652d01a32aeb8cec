#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "slogen/metrics.hpp"
#include "test_util.hpp"

using namespace slogen;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinAbs;

namespace {

std::vector<std::string> toks(std::initializer_list<const char*> ts) {
    return std::vector<std::string>(ts.begin(), ts.end());
}

std::vector<std::string> random_tokens(Rng& rng, std::size_t max_len) {
    static const std::vector<std::string> alphabet = {"ax", "bee", "cy"};
    std::vector<std::string> out(rng.below(max_len + 1));
    for (std::string& t : out) t = alphabet[rng.below(alphabet.size())];
    return out;
}

} // namespace

TEST_CASE("rouge_1 counts clipped unigram overlap") {
    SECTION("identical non-empty texts score a perfect F1") {
        RougeScore s = rouge_1(toks({"fresh", "coffee"}), toks({"fresh", "coffee"}));
        REQUIRE(s.precision == 1.0);
        REQUIRE(s.recall == 1.0);
        REQUIRE(s.f1 == 1.0);
    }
    SECTION("disjoint vocabularies score zero") {
        RougeScore s = rouge_1(toks({"ax", "bee"}), toks({"cy", "dee"}));
        REQUIRE(s.f1 == 0.0);
    }
    SECTION("hand-enumerated overlap") {
        // candidate {the, cat, sat} vs reference {the, cat}: 2 shared unigrams
        RougeScore s = rouge_1("the cat sat", "the cat");
        REQUIRE(s.precision == 2.0 / 3.0);
        REQUIRE(s.recall == 1.0);
        REQUIRE_THAT(s.f1, WithinAbs(0.8, 1e-12));
    }
    SECTION("repeats are clipped to the reference count") {
        RougeScore s = rouge_1(toks({"a", "a", "a"}), toks({"a", "a"}));
        REQUIRE(s.precision == 2.0 / 3.0);
        REQUIRE(s.recall == 1.0);
    }
    SECTION("empty inputs give zero scores, not errors") {
        REQUIRE(rouge_1(toks({}), toks({})).f1 == 0.0);
        REQUIRE(rouge_1(toks({}), toks({"a"})).f1 == 0.0);
        REQUIRE(rouge_1(toks({"a"}), toks({})).f1 == 0.0);
    }
    SECTION("string overloads tokenize and lowercase first") {
        RougeScore direct = rouge_1(toks({"the", "cat", "sat"}), toks({"the", "cat"}));
        RougeScore via_text = rouge_1("The Cat sat", "the CAT");
        REQUIRE(direct.precision == via_text.precision);
        REQUIRE(direct.recall == via_text.recall);
        REQUIRE(direct.f1 == via_text.f1);
    }
}

TEST_CASE("rouge_l scores the longest common subsequence") {
    SECTION("identical texts score a perfect F1") {
        REQUIRE(rouge_l("brew it bold", "brew it bold").f1 == 1.0);
    }
    SECTION("hand-enumerated subsequence") {
        // LCS of {a,b,c,d} and {a,c,d} is {a,c,d}, length 3
        RougeScore s = rouge_l("a b c d", "a c d");
        REQUIRE(s.precision == 0.75);
        REQUIRE(s.recall == 1.0);
        REQUIRE_THAT(s.f1, WithinAbs(6.0 / 7.0, 1e-12));
    }
    SECTION("reversal shares only single-token subsequences") {
        REQUIRE(lcs_length(toks({"a", "b", "c"}), toks({"c", "b", "a"})) == 1);
        RougeScore s = rouge_l("a b c", "c b a");
        REQUIRE(s.precision == 1.0 / 3.0);
        REQUIRE(s.recall == 1.0 / 3.0);
    }
    SECTION("empty sequences") {
        REQUIRE(lcs_length(toks({}), toks({"a", "b"})) == 0);
        REQUIRE(rouge_l("", "a b").f1 == 0.0);
        REQUIRE(rouge_l("", "").f1 == 0.0);
    }
}

TEST_CASE("dynamic-programming LCS agrees with brute-force subsequence enumeration") {
    // Exhaustive up to length 4; longer sequences are sampled here and swept
    // in full by the acceptance binary.
    testutil::SubsequenceOracle oracle(8);
    const auto& seqs = oracle.sequences();
    auto production = [&](std::size_t ia, std::size_t ib) {
        return lcs_length(testutil::symbols_to_tokens(seqs[ia]), testutil::symbols_to_tokens(seqs[ib]));
    };

    SECTION("every ordered pair of sequences up to length 4") {
        std::size_t short_count = 0;
        while (short_count < seqs.size() && seqs[short_count].size() <= 4) ++short_count;
        REQUIRE(short_count == 121);
        for (std::size_t ia = 0; ia < short_count; ++ia) {
            for (std::size_t ib = 0; ib < short_count; ++ib) {
                REQUIRE(production(ia, ib) == static_cast<std::size_t>(oracle.lcs(ia, ib)));
            }
        }
    }
    SECTION("random pairs up to length 8") {
        Rng rng(404);
        for (int trial = 0; trial < 300; ++trial) {
            std::size_t ia = rng.below(seqs.size());
            std::size_t ib = rng.below(seqs.size());
            REQUIRE(production(ia, ib) == static_cast<std::size_t>(oracle.lcs(ia, ib)));
        }
    }
}

TEST_CASE("rouge scores satisfy structural properties on random inputs") {
    Rng rng(77);
    for (int trial = 0; trial < 500; ++trial) {
        std::vector<std::string> a = random_tokens(rng, 8);
        std::vector<std::string> b = random_tokens(rng, 8);
        using RougeFn = RougeScore (*)(const std::vector<std::string>&, const std::vector<std::string>&);
        for (RougeFn rouge : {static_cast<RougeFn>(rouge_1), static_cast<RougeFn>(rouge_l)}) {
            RougeScore ab = rouge(a, b);
            RougeScore ba = rouge(b, a);
            REQUIRE(ab.precision == ba.recall);
            REQUIRE(ab.recall == ba.precision);
            REQUIRE(ab.f1 == ba.f1);
            REQUIRE(ab.f1 <= std::max(ab.precision, ab.recall) + 1e-15);
            REQUIRE((ab.f1 == 0.0) == (ab.precision == 0.0));
            REQUIRE(ab.f1 >= 0.0);
            REQUIRE(ab.f1 <= 1.0 + 1e-15);
        }
        REQUIRE(lcs_length(a, b) <= std::min(a.size(), b.size()));
    }
}

TEST_CASE("cosine similarity") {
    SECTION("self-similarity is exactly one") {
        std::vector<double> u = {0.3, -1.7, 2.2};
        REQUIRE(cosine(u, u) == 1.0);
        std::vector<double> copy = u;
        REQUIRE(cosine(u, copy) == 1.0);
    }
    SECTION("orthogonal and antipodal vectors") {
        REQUIRE(cosine({1.0, 0.0}, {0.0, 1.0}) == 0.0);
        std::vector<double> u = {0.4, -2.0, 0.9};
        std::vector<double> neg = {-0.4, 2.0, -0.9};
        REQUIRE_THAT(cosine(u, neg), WithinAbs(-1.0, 1e-12));
    }
    SECTION("bounded on random non-zero vectors") {
        Rng rng(12);
        for (int trial = 0; trial < 200; ++trial) {
            std::vector<double> u(8), v(8);
            for (double& x : u) x = rng.normal(0.0, 1.0);
            for (double& x : v) x = rng.normal(0.0, 1.0);
            double c = cosine(u, v);
            REQUIRE(c >= -1.0 - 1e-12);
            REQUIRE(c <= 1.0 + 1e-12);
        }
    }
    SECTION("rejects zero vectors and mismatched dimensions") {
        REQUIRE_THROWS_MATCHES(cosine({0.0, 0.0}, {1.0, 2.0}), Error,
                               Catch::Matchers::MessageMatches(ContainsSubstring("zero")));
        REQUIRE_THROWS_AS(cosine({1.0}, {1.0, 2.0}), Error);
        REQUIRE_THROWS_AS(cosine({}, {}), Error);
    }
}

TEST_CASE("mean-pool provider averages hidden states of content tokens") {
    std::vector<Record> records = generate_fixture(10, 2);
    std::vector<Pair> pairs = expand_pairs(clean_records(records));
    Vocabulary vocab = build_vocab(pairs, 300);

    ModelConfig c;
    c.d_model = 8;
    c.n_heads = 1;
    c.n_enc_layers = 1;
    c.n_dec_layers = 1;
    c.d_ff = 16;
    c.max_len = 16;
    c.vocab_size = vocab.size();
    ModelParams params = init_params(c, 99);
    ModelMeanPoolProvider provider(params, c, vocab);

    SECTION("dimension and determinism") {
        REQUIRE(provider.dimension() == 8);
        std::vector<double> a = provider.embed("fresh coffee");
        std::vector<double> b = provider.embed("fresh coffee");
        REQUIRE(a.size() == 8);
        REQUIRE(a == b);
    }
    SECTION("a one-token sentence is that token's hidden state") {
        std::string word = pairs[0].slogan.substr(0, pairs[0].slogan.find(' '));
        std::vector<double> pooled = provider.embed(word);
        TensorPtr h = sentence_hidden_states(params, c, {vocab.id_of(tokenize(word)[0])});
        REQUIRE(h->shape[0] == 1);
        for (int j = 0; j < 8; ++j) REQUIRE(pooled[static_cast<std::size_t>(j)] == h->at(0, j));
    }
    SECTION("multi-token sentences average position-wise") {
        std::vector<double> pooled = provider.embed("fresh coffee now");
        std::vector<int> ids;
        for (const std::string& t : tokenize("fresh coffee now")) ids.push_back(vocab.id_of(t));
        TensorPtr h = sentence_hidden_states(params, c, ids);
        REQUIRE(h->shape[0] == 3);
        for (int j = 0; j < 8; ++j) {
            double mean = (h->at(0, j) + h->at(1, j) + h->at(2, j)) / 3.0;
            REQUIRE_THAT(pooled[static_cast<std::size_t>(j)], WithinAbs(mean, 1e-15));
        }
    }
    SECTION("long input is truncated rather than rejected") {
        std::string long_text;
        for (int i = 0; i < 40; ++i) long_text += "fresh ";
        REQUIRE_NOTHROW(provider.embed(long_text));
    }
    SECTION("empty text is rejected") {
        REQUIRE_THROWS_MATCHES(provider.embed(""), Error,
                               Catch::Matchers::MessageMatches(ContainsSubstring("empty")));
    }
}

TEST_CASE("external vectors provider round trips through its file format") {
    testutil::TempDir dir("vectors");
    std::string path = dir.str() + "/vecs.tsv";
    std::vector<std::pair<std::string, std::vector<double>>> entries = {
        {"fresh coffee", {1.0 / 3.0, -2.5e-7, 4.0}},
        {"bold brew", {0.0, 1.0, 0.0}},
    };
    write_vectors(path, entries);

    SECTION("lookup returns the stored coordinates exactly") {
        ExternalVectorsProvider provider(path);
        REQUIRE(provider.dimension() == 3);
        REQUIRE(provider.embed("fresh coffee") == entries[0].second);
        REQUIRE(provider.embed("bold brew") == entries[1].second);
    }
    SECTION("missing text is an error naming the text") {
        ExternalVectorsProvider provider(path);
        REQUIRE_THROWS_MATCHES(provider.embed("unknown slogan"), Error,
                               Catch::Matchers::MessageMatches(ContainsSubstring("unknown slogan")));
    }
    SECTION("parse failures carry line numbers") {
        std::string bad = dir.str() + "/bad.tsv";
        {
            std::ofstream out(bad);
            out << "abc123\t2\t0.5 0.5\n";
            out << "zzznothex!\t2\t1 0\n";
        }
        REQUIRE_THROWS_MATCHES(ExternalVectorsProvider(bad), Error,
                               Catch::Matchers::MessageMatches(ContainsSubstring(":2")));
        {
            std::ofstream out(bad);
            out << "abc123\t3\t0.5 0.5\n";
        }
        REQUIRE_THROWS_MATCHES(ExternalVectorsProvider(bad), Error,
                               Catch::Matchers::MessageMatches(ContainsSubstring("3 coordinates")));
        {
            std::ofstream out(bad);
            out << "abc123\t2\t0.5 0.5\n";
            out << "def456\t3\t1 0 0\n";
        }
        REQUIRE_THROWS_MATCHES(ExternalVectorsProvider(bad), Error,
                               Catch::Matchers::MessageMatches(ContainsSubstring("conflicts")));
        {
            std::ofstream out(bad);
        }
        REQUIRE_THROWS_MATCHES(ExternalVectorsProvider(bad), Error,
                               Catch::Matchers::MessageMatches(ContainsSubstring("no entries")));
        REQUIRE_THROWS_AS(ExternalVectorsProvider(dir.str() + "/absent.tsv"), Error);
    }
}

namespace {

// Three pairs with known vectors; rouge counts enumerated by hand below.
struct ToyEval {
    std::vector<Pair> pairs;
    GenerationMap generations;
    std::string vectors_path;
};

ToyEval make_toy_eval(testutil::TempDir& dir) {
    ToyEval t;
    t.pairs = {
        {"r1", 0, "fresh coffee every morning", "fresh start"},
        {"r2", 0, "handmade oak furniture", "built from oak"},
        {"r3", 0, "fast courier service", "we deliver fast"},
    };
    t.generations[{"r1", 0}] = "fresh coffee now";
    t.generations[{"r2", 0}] = "oak built to last";
    t.generations[{"r3", 0}] = "fast every time";

    std::vector<std::pair<std::string, std::vector<double>>> vecs = {
        {"fresh coffee every morning", {1.0, 1.0}},
        {"fresh start", {0.0, 1.0}},
        {"fresh coffee now", {1.0, 0.0}},
        {"handmade oak furniture", {2.0, 0.0}},
        {"built from oak", {-1.0, 0.0}},
        {"oak built to last", {1.0, 0.0}},
        {"fast courier service", {4.0, 3.0}},
        {"we deliver fast", {3.0, 4.0}},
        {"fast every time", {3.0, 4.0}},
    };
    t.vectors_path = dir.str() + "/toy_vecs.tsv";
    write_vectors(t.vectors_path, vecs);
    return t;
}

double f1(double p, double r) { return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

} // namespace

TEST_CASE("evaluate reproduces a hand-computed three-pair report") {
    testutil::TempDir dir("eval");
    ToyEval toy = make_toy_eval(dir);
    ExternalVectorsProvider provider(toy.vectors_path);

    EvalReport r = evaluate(toy.pairs, toy.generations, provider, "toy");
    REQUIRE(r.label == "toy");
    REQUIRE(r.sample_count == 3);

    // Unigram overlaps and LCS lengths below were enumerated by hand.
    // r1: gen {fresh,coffee,now} desc {fresh,coffee,every,morning} ref {fresh,start}
    // r2: gen {oak,built,to,last} desc {handmade,oak,furniture} ref {built,from,oak}
    // r3: gen {fast,every,time}   desc {fast,courier,service}   ref {we,deliver,fast}
    double r1_desc_a = f1(2.0 / 3.0, 2.0 / 4.0), r1_ref_a = f1(1.0 / 3.0, 1.0 / 2.0);
    double r1_desc_b = f1(1.0 / 4.0, 1.0 / 3.0), r1_ref_b = f1(2.0 / 4.0, 2.0 / 3.0);
    double r1_desc_c = f1(1.0 / 3.0, 1.0 / 3.0), r1_ref_c = f1(1.0 / 3.0, 1.0 / 3.0);
    // LCS: r1 desc {fresh,coffee}=2, ref {fresh}=1; r2 desc {oak}=1, ref {built}
    // or {oak}=1 (order blocks a longer match); r3 desc {fast}=1, ref {fast}=1.
    double rl_desc_a = f1(2.0 / 3.0, 2.0 / 4.0), rl_ref_a = f1(1.0 / 3.0, 1.0 / 2.0);
    double rl_desc_b = f1(1.0 / 4.0, 1.0 / 3.0), rl_ref_b = f1(1.0 / 4.0, 1.0 / 3.0);
    double rl_desc_c = f1(1.0 / 3.0, 1.0 / 3.0), rl_ref_c = f1(1.0 / 3.0, 1.0 / 3.0);
    // Cosines from the fixture vectors.
    double cos_desc_a = 1.0 / std::sqrt(2.0), cos_ref_a = 0.0;
    double cos_desc_b = 1.0, cos_ref_b = -1.0;
    double cos_desc_c = 24.0 / 25.0, cos_ref_c = 1.0;

    REQUIRE_THAT(r.rouge1_desc, WithinAbs(100.0 * (r1_desc_a + r1_desc_b + r1_desc_c) / 3.0, 1e-9));
    REQUIRE_THAT(r.rouge1_ref, WithinAbs(100.0 * (r1_ref_a + r1_ref_b + r1_ref_c) / 3.0, 1e-9));
    REQUIRE_THAT(r.rougeL_desc, WithinAbs(100.0 * (rl_desc_a + rl_desc_b + rl_desc_c) / 3.0, 1e-9));
    REQUIRE_THAT(r.rougeL_ref, WithinAbs(100.0 * (rl_ref_a + rl_ref_b + rl_ref_c) / 3.0, 1e-9));
    REQUIRE_THAT(r.cosine_desc, WithinAbs(100.0 * (cos_desc_a + cos_desc_b + cos_desc_c) / 3.0, 1e-9));
    REQUIRE_THAT(r.cosine_ref, WithinAbs(100.0 * (cos_ref_a + cos_ref_b + cos_ref_c) / 3.0, 1e-9));
}

TEST_CASE("evaluate contracts") {
    testutil::TempDir dir("evalc");
    ToyEval toy = make_toy_eval(dir);
    ExternalVectorsProvider provider(toy.vectors_path);

    SECTION("copying references as generations maxes the Ref columns") {
        GenerationMap copied;
        for (const Pair& p : toy.pairs) copied[{p.record_id, p.pair_index}] = p.slogan;
        EvalReport r = evaluate(toy.pairs, copied, provider, "refs");
        REQUIRE(r.rouge1_ref == 100.0);
        REQUIRE(r.rougeL_ref == 100.0);
        REQUIRE(r.cosine_ref == 100.0);
    }
    SECTION("pair order does not change the report") {
        EvalReport a = evaluate(toy.pairs, toy.generations, provider, "x");
        std::vector<Pair> reversed(toy.pairs.rbegin(), toy.pairs.rend());
        EvalReport b = evaluate(reversed, toy.generations, provider, "x");
        REQUIRE_THAT(b.rouge1_desc, WithinAbs(a.rouge1_desc, 1e-12));
        REQUIRE_THAT(b.rouge1_ref, WithinAbs(a.rouge1_ref, 1e-12));
        REQUIRE_THAT(b.rougeL_desc, WithinAbs(a.rougeL_desc, 1e-12));
        REQUIRE_THAT(b.rougeL_ref, WithinAbs(a.rougeL_ref, 1e-12));
        REQUIRE_THAT(b.cosine_desc, WithinAbs(a.cosine_desc, 1e-12));
        REQUIRE_THAT(b.cosine_ref, WithinAbs(a.cosine_ref, 1e-12));
    }
    SECTION("missing generations are reported by pair key") {
        GenerationMap partial = toy.generations;
        partial.erase({"r2", 0});
        REQUIRE_THROWS_MATCHES(evaluate(toy.pairs, partial, provider, "x"), Error,
                               Catch::Matchers::MessageMatches(ContainsSubstring("r2#0")));
    }
    SECTION("no pairs is an error") {
        REQUIRE_THROWS_AS(evaluate({}, toy.generations, provider, "x"), Error);
    }
    SECTION("an empty generation scores zero alignment instead of erroring") {
        GenerationMap gens = toy.generations;
        gens[{"r1", 0}] = "";
        EvalReport r = evaluate(toy.pairs, gens, provider, "x");
        double cos_desc_b = 1.0, cos_desc_c = 24.0 / 25.0;
        REQUIRE_THAT(r.cosine_desc, WithinAbs(100.0 * (0.0 + cos_desc_b + cos_desc_c) / 3.0, 1e-9));
        double r1_desc_b = f1(1.0 / 4.0, 1.0 / 3.0), r1_desc_c = f1(1.0 / 3.0, 1.0 / 3.0);
        REQUIRE_THAT(r.rouge1_desc, WithinAbs(100.0 * (0.0 + r1_desc_b + r1_desc_c) / 3.0, 1e-9));
        EvalReport m = evaluate(toy.pairs, gens, provider, "x", RefReduce::max_over_siblings);
        REQUIRE(std::isfinite(m.cosine_ref));
    }
    SECTION("max-over-siblings scores against the best sibling reference") {
        std::vector<Pair> pairs = {
            {"rx", 0, "desc one", "alpha beta"},
            {"rx", 1, "desc one", "gamma delta"},
        };
        GenerationMap gens;
        gens[{"rx", 0}] = "gamma delta";
        gens[{"rx", 1}] = "gamma delta";
        std::vector<std::pair<std::string, std::vector<double>>> vecs = {
            {"desc one", {1.0, 0.0}},
            {"alpha beta", {0.0, 1.0}},
            {"gamma delta", {1.0, 1.0}},
        };
        std::string path = dir.str() + "/sib_vecs.tsv";
        write_vectors(path, vecs);
        ExternalVectorsProvider sib_provider(path);

        EvalReport per_pair = evaluate(pairs, gens, sib_provider, "pp", RefReduce::per_pair);
        REQUIRE_THAT(per_pair.rouge1_ref, WithinAbs(50.0, 1e-12));
        EvalReport best = evaluate(pairs, gens, sib_provider, "mx", RefReduce::max_over_siblings);
        REQUIRE(best.rouge1_ref == 100.0);
        REQUIRE(best.rougeL_ref == 100.0);
        REQUIRE(best.cosine_ref == 100.0);
        REQUIRE(best.rouge1_desc == per_pair.rouge1_desc);
    }
    SECTION("ref_reduce parsing") {
        REQUIRE(parse_ref_reduce("per_pair") == RefReduce::per_pair);
        REQUIRE(parse_ref_reduce("max") == RefReduce::max_over_siblings);
        REQUIRE_THROWS_AS(parse_ref_reduce("min"), Error);
    }
}

TEST_CASE("report writers emit the six columns in table order") {
    EvalReport r;
    r.label = "toy";
    r.sample_count = 3;
    r.rouge1_desc = 1.0 / 3.0;
    r.rouge1_ref = 2.0;
    r.rougeL_desc = 3.0;
    r.rougeL_ref = 4.0;
    r.cosine_desc = 5.0;
    r.cosine_ref = 6.0;

    SECTION("csv header, order, and full-precision round trip") {
        std::ostringstream out;
        write_eval_csv(out, {r});
        std::istringstream in(out.str());
        std::string header, row;
        std::getline(in, header);
        REQUIRE(header == "model,samples,rouge1_desc,rouge1_ref,rougeL_desc,rougeL_ref,cosine_desc,cosine_ref");
        std::getline(in, row);
        REQUIRE(row.rfind("toy,3,", 0) == 0);
        std::string first_value = row.substr(6, row.find(',', 6) - 6);
        REQUIRE(std::stod(first_value) == 1.0 / 3.0);
    }
    SECTION("text table carries headers and four-decimal cells") {
        std::ostringstream out;
        write_eval_text(out, {r});
        std::string text = out.str();
        for (const char* head : {"R1-Desc", "R1-Ref", "RL-Desc", "RL-Ref", "Cos-Desc", "Cos-Ref", "N"}) {
            REQUIRE_THAT(text, ContainsSubstring(head));
        }
        REQUIRE_THAT(text, ContainsSubstring("0.3333"));
        REQUIRE_THAT(text, ContainsSubstring("toy"));
    }
}

namespace {

std::vector<PairwiseJudgment> cell_judgments(const std::string& a, const std::string& b, Criterion c,
                                             int a_wins, int total, int start_id = 0) {
    std::vector<PairwiseJudgment> out;
    for (int i = 0; i < total; ++i) {
        PairwiseJudgment j;
        j.sample_id = "s" + std::to_string(start_id + i);
        j.criterion = c;
        j.system_a = a;
        j.system_b = b;
        j.winner = i < a_wins ? 'a' : 'b';
        out.push_back(j);
    }
    return out;
}

} // namespace

TEST_CASE("preference aggregation builds per-opponent win tables") {
    SECTION("all wins scores 100 in every cell") {
        std::vector<PairwiseJudgment> js;
        for (Criterion c : {Criterion::distinctiveness, Criterion::coherence, Criterion::fluency}) {
            auto batch = cell_judgments("ours", "other", c, 5, 5);
            js.insert(js.end(), batch.begin(), batch.end());
        }
        PreferenceTable t = aggregate_preferences(js, "ours");
        for (std::size_t c = 0; c < 3; ++c) {
            REQUIRE(t.cells.at("other")[c].percent() == 100.0);
            REQUIRE(t.average(static_cast<Criterion>(c)) == 100.0);
        }
    }
    SECTION("six wins of ten is exactly sixty percent") {
        auto js = cell_judgments("ours", "other", Criterion::coherence, 6, 10);
        PreferenceTable t = aggregate_preferences(js, "ours");
        REQUIRE(t.cells.at("other")[1].percent() == 60.0);
    }
    SECTION("focal and opposing percentages sum to exactly 100") {
        for (auto [wins, total] : std::vector<std::pair<int, int>>{{1, 3}, {7, 13}, {0, 9}, {5, 7}}) {
            auto js = cell_judgments("A", "B", Criterion::fluency, wins, total);
            double pa = aggregate_preferences(js, "A").cells.at("B")[2].percent();
            double pb = aggregate_preferences(js, "B").cells.at("A")[2].percent();
            REQUIRE(pa + pb == 100.0);
        }
    }
    SECTION("the focal system may appear on either side") {
        std::vector<PairwiseJudgment> js;
        PairwiseJudgment j;
        j.sample_id = "s0";
        j.criterion = Criterion::distinctiveness;
        j.system_a = "other";
        j.system_b = "ours";
        j.winner = 'b'; // focal win from the b side
        js.push_back(j);
        j.winner = 'a';
        js.push_back(j);
        PreferenceTable t = aggregate_preferences(js, "ours");
        REQUIRE(t.cells.at("other")[0].wins == 1);
        REQUIRE(t.cells.at("other")[0].total == 2);
    }
    SECTION("average is the arithmetic mean over present cells") {
        auto js = cell_judgments("ours", "sysA", Criterion::coherence, 6, 10);
        auto more = cell_judgments("ours", "sysB", Criterion::coherence, 7, 10, 10);
        js.insert(js.end(), more.begin(), more.end());
        PreferenceTable t = aggregate_preferences(js, "ours");
        REQUIRE(t.average(Criterion::coherence) == (60.0 + 70.0) / 2.0);
        REQUIRE(t.opponents == std::vector<std::string>{"sysA", "sysB"});
        REQUIRE_FALSE(t.average_present(Criterion::fluency));
        REQUIRE_FALSE(t.cells.at("sysA")[2].present());
    }
    SECTION("judgments not involving the focal system are rejected") {
        auto js = cell_judgments("A", "B", Criterion::coherence, 1, 1);
        REQUIRE_THROWS_MATCHES(aggregate_preferences(js, "C"), Error,
                               Catch::Matchers::MessageMatches(ContainsSubstring("focal")));
    }
    SECTION("invalid winner marks are rejected") {
        auto js = cell_judgments("A", "B", Criterion::coherence, 1, 1);
        js[0].winner = 'x';
        REQUIRE_THROWS_AS(aggregate_preferences(js, "A"), Error);
    }
}

TEST_CASE("preference tables render with absent cells dashed") {
    auto js = cell_judgments("ours", "other", Criterion::distinctiveness, 3, 4);
    PreferenceTable t = aggregate_preferences(js, "ours");

    std::ostringstream text;
    write_preference_text(text, t);
    REQUIRE_THAT(text.str(), ContainsSubstring("vs other"));
    REQUIRE_THAT(text.str(), ContainsSubstring("75.00000"));
    REQUIRE_THAT(text.str(), ContainsSubstring("Average"));
    REQUIRE_THAT(text.str(), ContainsSubstring("-"));

    std::ostringstream csv;
    write_preference_csv(csv, t);
    std::istringstream in(csv.str());
    std::string header, row;
    std::getline(in, header);
    REQUIRE(header == "against,distinctiveness,coherence,fluency");
    std::getline(in, row);
    REQUIRE(row == "other,75,,");
}

TEST_CASE("generations and judgments round trip through their files") {
    testutil::TempDir dir("wire");

    SECTION("generations") {
        std::vector<Pair> pairs = {
            {"r1", 0, "d", "s"},
            {"r1", 1, "d", "s2"},
            {"r2", 0, "d2", "s3"},
        };
        GenerationMap gens;
        gens[{"r1", 0}] = "first slogan";
        gens[{"r1", 1}] = "second slogan";
        gens[{"r2", 0}] = "third slogan";
        std::string path = dir.str() + "/gens.tsv";
        write_generations(path, pairs, gens);
        REQUIRE(read_generations(path) == gens);

        GenerationMap partial = gens;
        partial.erase({"r1", 1});
        REQUIRE_THROWS_AS(write_generations(dir.str() + "/p.tsv", pairs, partial), Error);

        std::ofstream bad(dir.str() + "/bad.tsv");
        bad << "r1\tzero\tslogan\n";
        bad.close();
        REQUIRE_THROWS_MATCHES(read_generations(dir.str() + "/bad.tsv"), Error,
                               Catch::Matchers::MessageMatches(ContainsSubstring("pair index")));
        std::ofstream bad2(dir.str() + "/bad2.tsv");
        bad2 << "r1 0 slogan\n";
        bad2.close();
        REQUIRE_THROWS_AS(read_generations(dir.str() + "/bad2.tsv"), Error);
        REQUIRE_THROWS_AS(read_generations(dir.str() + "/missing.tsv"), Error);
    }
    SECTION("judgments") {
        std::vector<PairwiseJudgment> js;
        int id = 0;
        for (Criterion c : {Criterion::distinctiveness, Criterion::coherence, Criterion::fluency}) {
            for (char w : {'a', 'b'}) {
                PairwiseJudgment j;
                j.sample_id = "sample-" + std::to_string(id++);
                j.criterion = c;
                j.system_a = "ours";
                j.system_b = "baseline";
                j.winner = w;
                js.push_back(j);
            }
        }
        std::string path = dir.str() + "/judg.tsv";
        write_judgments(path, js);
        std::vector<PairwiseJudgment> back = read_judgments(path);
        REQUIRE(back.size() == js.size());
        for (std::size_t i = 0; i < js.size(); ++i) {
            REQUIRE(back[i].sample_id == js[i].sample_id);
            REQUIRE(back[i].criterion == js[i].criterion);
            REQUIRE(back[i].system_a == js[i].system_a);
            REQUIRE(back[i].system_b == js[i].system_b);
            REQUIRE(back[i].winner == js[i].winner);
        }

        std::ofstream bad(dir.str() + "/bad.tsv");
        bad << "s0\tcoherence\tours\tbaseline\n";
        bad.close();
        REQUIRE_THROWS_MATCHES(read_judgments(dir.str() + "/bad.tsv"), Error,
                               Catch::Matchers::MessageMatches(ContainsSubstring("5 tab-separated")));
        std::ofstream bad2(dir.str() + "/bad2.tsv");
        bad2 << "s0\tnovelty\tours\tbaseline\ta\n";
        bad2.close();
        REQUIRE_THROWS_MATCHES(read_judgments(dir.str() + "/bad2.tsv"), Error,
                               Catch::Matchers::MessageMatches(ContainsSubstring("criterion")));
        std::ofstream bad3(dir.str() + "/bad3.tsv");
        bad3 << "s0\tcoherence\tours\tbaseline\tc\n";
        bad3.close();
        REQUIRE_THROWS_MATCHES(read_judgments(dir.str() + "/bad3.tsv"), Error,
                               Catch::Matchers::MessageMatches(ContainsSubstring("winner")));
    }
}
