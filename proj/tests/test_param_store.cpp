#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "segdesic/errors.hpp"
#include "segdesic/param_store.hpp"
#include "segdesic/rng.hpp"
#include "support/temp_dir.hpp"

using namespace segdesic;

namespace {

std::string file_bytes(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

ParameterStore sample_store() {
    ParameterStore store;
    Rng rng(99);
    Tensor w({4, 3, 3, 3});
    for (std::size_t i = 0; i < w.numel(); ++i) w[i] = rng.uniform(-1.0, 1.0);
    store.add("enc00.conv.weight", std::move(w), true);
    store.add("enc00.conv.bias", Tensor({4}), true);
    store.add("enc00.bn.running_mean", Tensor({4}), false);
    Tensor rv = Tensor::full({4}, 1.0);
    rv[2] = 0x1.123456789abcdp-3; // exercise full mantissas
    store.add("enc00.bn.running_var", std::move(rv), false);
    return store;
}

} // namespace

TEST_SUITE("param_store") {

TEST_CASE("names are unique and ordered") {
    ParameterStore store = sample_store();
    CHECK_THROWS_AS(store.add("enc00.conv.bias", Tensor({4}), true), ConfigError);
    auto names = store.names();
    REQUIRE(names.size() == 4);
    CHECK(std::is_sorted(names.begin(), names.end()));
    CHECK(store.trainable_names().size() == 2);
    CHECK_FALSE(store.is_trainable("enc00.bn.running_mean"));
    CHECK_THROWS_AS(store.at("missing"), ConfigError);
}

TEST_CASE("zero_grad clears trainable gradients") {
    ParameterStore store = sample_store();
    store.zero_grad();
    CHECK(store.at("enc00.conv.weight").has_grad());
    for (std::size_t i = 0; i < store.at("enc00.conv.weight").grad().numel(); ++i)
        CHECK(store.at("enc00.conv.weight").grad()[i] == 0.0);
}

TEST_CASE("clone is a deep copy") {
    ParameterStore store = sample_store();
    ParameterStore copy = store.clone();
    copy.at("enc00.conv.bias").value()[0] = 7.0;
    CHECK(store.at("enc00.conv.bias").value()[0] == 0.0);
}

TEST_CASE("checkpoint round trip is bit-exact") {
    testing::TempDir tmp("ckpt");
    ParameterStore store = sample_store();
    auto p1 = tmp.path() / "a.sdnckpt";
    auto p2 = tmp.path() / "b.sdnckpt";
    store.save(p1);

    ParameterStore loaded = ParameterStore::load(p1);
    REQUIRE(loaded.names() == store.names());
    for (const auto& name : store.names()) {
        const Tensor& a = store.at(name).value();
        const Tensor& b = loaded.at(name).value();
        REQUIRE(a.same_shape(b));
        for (std::size_t i = 0; i < a.numel(); ++i) CHECK(a[i] == b[i]);
        CHECK(loaded.is_trainable(name) == store.is_trainable(name));
    }

    loaded.save(p2);
    CHECK(file_bytes(p1) == file_bytes(p2));
}

TEST_CASE("checkpoint header starts with the magic") {
    testing::TempDir tmp("ckpt");
    auto p = tmp.path() / "c.sdnckpt";
    sample_store().save(p);
    std::string bytes = file_bytes(p);
    REQUIRE(bytes.size() > 8);
    CHECK(bytes.substr(0, 8) == "SDNCKPT1");
}

TEST_CASE("checkpoint io errors") {
    testing::TempDir tmp("ckpt");
    CHECK_THROWS_AS(ParameterStore::load(tmp.path() / "absent.sdnckpt"), IoError);
    auto bad = tmp.path() / "bad.sdnckpt";
    std::ofstream(bad, std::ios::binary) << "NOTMAGIC" << std::string(16, '\0');
    CHECK_THROWS_AS(ParameterStore::load(bad), IoError);
}

} // TEST_SUITE
