#include <gtest/gtest.h>

#include "bag/features.hpp"
#include "bag/lstm.hpp"
#include "bag/model.hpp"
#include "bag/synthetic.hpp"

#include <cstdio>
#include <fstream>
#include <random>

using namespace bag;

namespace {

TEST(HashEmbedding, DeterministicUnitRows) {
    HashEmbedding emb(16, 9);
    Mat m = embed_tokens({"alpha", "beta", "alpha"}, emb);
    EXPECT_TRUE(m.row(0).isApprox(m.row(2)));
    EXPECT_FALSE(m.row(0).isApprox(m.row(1)));
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(m.row(i).norm(), 1.0, 1e-9);
}

TEST(HashEmbedding, SeedChangesVectors) {
    HashEmbedding a(8, 1), b(8, 2);
    EXPECT_FALSE(a.lookup("tok").isApprox(b.lookup("tok")));
}

TEST(FileEmbedding, KnownAndUnknownTokens) {
    std::string path = testing::TempDir() + "emb.txt";
    {
        std::ofstream out(path);
        out << "hello 1 2 3\nworld 4 5 6\n";
    }
    FileEmbedding emb(path);
    EXPECT_EQ(emb.dim(), 3);
    EXPECT_EQ(emb.lookup("Hello")(1), 2.0);
    EXPECT_TRUE(emb.lookup("absent").isZero());
    std::remove(path.c_str());
}

TEST(FileEmbedding, UnreadableFileThrows) {
    EXPECT_THROW(FileEmbedding("/nonexistent/emb.txt"), std::runtime_error);
}

TEST(HashContextual, WindowDeterminesVector) {
    HashContextual ctx(12, 4);
    // Same token, same +-2 window, different documents.
    Document d1{0, {"x", "a", "b", "t", "c", "d", "y"}};
    Document d2{5, {"q", "a", "b", "t", "c", "d"}};
    Mat m1 = ctx.contextual(d1);
    Mat m2 = ctx.contextual(d2);
    EXPECT_TRUE(m1.row(3).isApprox(m2.row(3)));

    // A token three positions away does not matter.
    Document d3 = d1;
    d3.tokens[0] = "CHANGED";
    EXPECT_TRUE(ctx.contextual(d3).row(3).isApprox(m1.row(3)));

    // A token inside the window does.
    Document d4 = d1;
    d4.tokens[2] = "CHANGED";
    EXPECT_FALSE(ctx.contextual(d4).row(3).isApprox(m1.row(3)));
}

TEST(HashContextual, OneTokenDocumentDependsOnTokenOnly) {
    HashContextual ctx(8, 4);
    Mat a = ctx.contextual(Document{0, {"solo"}});
    Mat b = ctx.contextual(Document{9, {"solo"}});
    EXPECT_TRUE(a.isApprox(b));
}

TEST(FileContextual, MissingDocumentThrows) {
    std::string path = testing::TempDir() + "ctx.jsonl";
    {
        std::ofstream out(path);
        out << R"({"doc_id":0,"vectors":[[1.0,2.0],[3.0,4.0]]})" << "\n";
    }
    FileContextual ctx(path);
    Mat m = ctx.contextual(Document{0, {"a", "b"}});
    EXPECT_EQ(m(1, 1), 4.0);
    EXPECT_THROW(ctx.contextual(Document{1, {"a"}}), std::runtime_error);
    std::remove(path.c_str());
}

TEST(Tagger, RuleExamples) {
    auto [ner, pos] = tag_tokens({"1965"});
    EXPECT_EQ(ner[0], NerTag::NUM);
    EXPECT_EQ(pos[0], PosTag::NUM);
    auto [ner2, pos2] = tag_tokens({"the"});
    EXPECT_EQ(ner2[0], NerTag::O);
    EXPECT_EQ(pos2[0], PosTag::FUNC);
}

// Hand-tagged fixture sentence.
TEST(Tagger, FixtureSentence) {
    TokenList tokens = {"Kepahiang", "is", "a", "regency", "quickly",
                        "founded", "in", "1965", "by", "Bengkulu"};
    std::vector<NerTag> want_ner = {NerTag::ENT, NerTag::O,   NerTag::O,  NerTag::O,
                                    NerTag::O,   NerTag::O,   NerTag::O,  NerTag::NUM,
                                    NerTag::O,   NerTag::ENT};
    std::vector<PosTag> want_pos = {PosTag::NOUN, PosTag::FUNC, PosTag::FUNC, PosTag::NOUN,
                                    PosTag::ADV,  PosTag::VERB, PosTag::FUNC, PosTag::NUM,
                                    PosTag::FUNC, PosTag::NOUN};
    auto [ner, pos] = tag_tokens(tokens);
    EXPECT_EQ(ner, want_ner);
    EXPECT_EQ(pos, want_pos);
}

TEST(TagSource, FileBackedOverridesRules) {
    std::string path = testing::TempDir() + "tags.jsonl";
    {
        std::ofstream out(path);
        out << R"({"doc_id":2,"ner":[1,0],"pos":[0,1]})" << "\n";
    }
    TagSource src(path);
    auto [ner, pos] = src.tags(Document{2, {"x", "y"}});
    EXPECT_EQ(ner[0], NerTag::ENT);
    EXPECT_EQ(pos[1], PosTag::FUNC);
    // Unlisted documents fall back to the rule-based tagger.
    auto [ner2, pos2] = src.tags(Document{3, {"1965"}});
    EXPECT_EQ(ner2[0], NerTag::NUM);
    std::remove(path.c_str());
}

TEST(SpanAveraging, MatchesExplicitLoop) {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> n(0.0, 1.0);
    Mat feats(6, 4);
    for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 4; ++j) feats(i, j) = n(rng);
    EntityGraph g;
    g.nodes = {Mention{0, 0, 2, 3}, Mention{1, 0, 1, 4}};
    Mat avg = average_span_features(g, {feats});
    EXPECT_TRUE(avg.row(0).isApprox(feats.row(2)));  // mean of one
    Eigen::RowVectorXd manual = Eigen::RowVectorXd::Zero(4);
    for (int tkn = 1; tkn < 4; ++tkn) manual += feats.row(tkn);
    manual /= 3.0;
    EXPECT_TRUE(avg.row(1).isApprox(manual, 1e-12));
}

TEST(SpanAveraging, SpanOutsideDocumentThrows) {
    EntityGraph g;
    g.nodes = {Mention{0, 0, 1, 9}};
    EXPECT_THROW(average_span_features(g, {Mat::Zero(3, 2)}), std::invalid_argument);
}

LstmDirVars zero_lstm(ad::Tape& t, int in, int hidden) {
    return {t.leaf(ad::Mat::Zero(in, 4 * hidden)), t.leaf(ad::Mat::Zero(hidden, 4 * hidden)),
            t.leaf(ad::Mat::Zero(1, 4 * hidden))};
}

TEST(Lstm, ZeroWeightsZeroForgetBiasGiveZeroOutput) {
    ad::Tape t;
    std::mt19937_64 rng(4);
    std::normal_distribution<double> n(0.0, 1.0);
    ad::Mat x(3, 5);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 5; ++j) x(i, j) = n(rng);
    ad::Var out = lstm_direction(t, t.leaf(x), zero_lstm(t, 5, 4), 4, false);
    EXPECT_TRUE(t.val(out).isZero(1e-15));
}

TEST(Lstm, ReversedInputSwapsDirections) {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> n(0.0, 1.0);
    auto rand_mat = [&](int r, int c) {
        ad::Mat m(r, c);
        for (int i = 0; i < r; ++i)
            for (int j = 0; j < c; ++j) m(i, j) = n(rng);
        return m;
    };
    ad::Mat Wx = rand_mat(5, 16), Wh = rand_mat(4, 16), b = rand_mat(1, 16);
    ad::Mat x = rand_mat(6, 5);
    ad::Mat x_rev = x.colwise().reverse();

    ad::Tape t;
    LstmDirVars p{t.leaf(Wx), t.leaf(Wh), t.leaf(b)};
    ad::Var fwd = lstm_direction(t, t.leaf(x), p, 4, false);
    ad::Var bwd = lstm_direction(t, t.leaf(x_rev), p, 4, true);
    // fwd(x)(s) == bwd(reverse(x))(M-1-s)
    for (int s = 0; s < 6; ++s)
        EXPECT_TRUE(t.val(fwd).row(s).isApprox(t.val(bwd).row(5 - s), 1e-12));
}

TEST(Lstm, OutputStaysInOpenUnitInterval) {
    std::mt19937_64 rng(6);
    std::normal_distribution<double> n(0.0, 2.0);
    auto rand_mat = [&](int r, int c) {
        ad::Mat m(r, c);
        for (int i = 0; i < r; ++i)
            for (int j = 0; j < c; ++j) m(i, j) = n(rng);
        return m;
    };
    ad::Tape t;
    std::vector<BiLstmLayerVars> layers;
    for (int l = 0; l < 2; ++l) {
        int in = l == 0 ? 3 : 8;
        layers.push_back({{t.leaf(rand_mat(in, 16)), t.leaf(rand_mat(4, 16)), t.leaf(rand_mat(1, 16))},
                          {t.leaf(rand_mat(in, 16)), t.leaf(rand_mat(4, 16)), t.leaf(rand_mat(1, 16))}});
    }
    ad::Var out = bilstm(t, t.leaf(rand_mat(7, 3)), layers, 4);
    EXPECT_LT(t.val(out).maxCoeff(), 1.0);
    EXPECT_GT(t.val(out).minCoeff(), -1.0);
}

TEST(Lstm, AnalyticJacobianMatchesFiniteDifferences) {
    std::mt19937_64 rng(7);
    std::normal_distribution<double> n(0.0, 0.5);
    auto rand_mat = [&](int r, int c) {
        ad::Mat m(r, c);
        for (int i = 0; i < r; ++i)
            for (int j = 0; j < c; ++j) m(i, j) = n(rng);
        return m;
    };
    ad::Mat Wx = rand_mat(3, 12), Wh = rand_mat(3, 12), b = rand_mat(1, 12);
    ad::Mat x = rand_mat(5, 3);
    ad::Mat probe = rand_mat(5, 3);  // fixed projection to a scalar

    // Scalar objective: mean-projected sum of out .* probe.
    ad::Tape t;
    LstmDirVars p{t.leaf(Wx), t.leaf(Wh), t.leaf(b)};
    ad::Var out = lstm_direction(t, t.leaf(x), p, 3, false);
    ad::Var prod = t.cwise_mul(out, t.leaf(probe));
    ad::Var loss = t.matmul(t.transpose(t.rowwise_mean(prod)), t.leaf(ad::Mat::Ones(5, 1)));
    t.backward(loss);

    auto eval = [&]() {
        ad::Tape t2;
        LstmDirVars p2{t2.leaf(Wx), t2.leaf(Wh), t2.leaf(b)};
        ad::Var o2 = lstm_direction(t2, t2.leaf(x), p2, 3, false);
        ad::Var pr = t2.cwise_mul(o2, t2.leaf(probe));
        ad::Var l2 = t2.matmul(t2.transpose(t2.rowwise_mean(pr)), t2.leaf(ad::Mat::Ones(5, 1)));
        return t2.val(l2)(0, 0);
    };

    const double step = 1e-5;
    std::uniform_int_distribution<int> rr(0, 2), rc(0, 11);
    for (int probe_i = 0; probe_i < 12; ++probe_i) {
        int r = rr(rng), c = rc(rng);
        ad::Mat* tensor = probe_i % 3 == 0 ? &Wx : probe_i % 3 == 1 ? &Wh : &b;
        int rrow = tensor == &b ? 0 : r;
        double saved = (*tensor)(rrow, c);
        (*tensor)(rrow, c) = saved + step;
        double up = eval();
        (*tensor)(rrow, c) = saved - step;
        double down = eval();
        (*tensor)(rrow, c) = saved;
        double fd = (up - down) / (2 * step);
        ad::Var v = tensor == &Wx ? p.Wx : tensor == &Wh ? p.Wh : p.b;
        double an = t.grad(v)(rrow, c);
        double denom = std::max({std::abs(fd), std::abs(an), 1e-8});
        EXPECT_LT(std::abs(an - fd) / denom, 1e-4);
    }
}

TEST(FeatureWidth, DefaultDimsGive528) {
    TrainConfig cfg;
    Model m(cfg, Variant::FULL);
    EXPECT_EQ(m.feature_dim(), 512 + 8 + 8);
}

}  // namespace
