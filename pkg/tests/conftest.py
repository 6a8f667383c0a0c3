"""Shared fixtures: two real-world fix examples used across test modules."""

from __future__ import annotations

import pytest

# CVE-2012-0207 (Linux igmp): the fix guards a mod-operation denominator
# against zero. igmp_heard_query changes; igmp_start_timer does not.
IGMP_VULN = """\
static void igmp_heard_query(struct in_device *in_dev, struct sk_buff *skb, int len) {
 ...
 int max_delay;
 if (len == 8) {
  ...
 } else if (IGMP_V2_SEEN(in_dev)) {
  max_delay = IGMPV3_MRC(ih3->code)*(HZ/IGMP_TIMER_SCALE);


 } else {
  ...
 }
 rcu_read_lock();
 for_each_pmc_rcu(in_dev, im) {
  ...
  igmp_start_timer(im, max_delay);
 }
 rcu_read_unlock();
}
static void igmp_start_timer(struct ip_mc_list *im,       int max_delay) {
 int tv = net_random() % max_delay;
 im->tm_running = 1;
 if (!mod_timer(&im->timer, jiffies+tv+2))
  atomic_inc(&im->refcnt);
}
"""

IGMP_FIXED = """\
static void igmp_heard_query(struct in_device *in_dev, struct sk_buff *skb, int len) {
 ...
 int max_delay;
 if (len == 8) {
  ...
 } else if (IGMP_V2_SEEN(in_dev)) {
  max_delay = IGMPV3_MRC(ih3->code)*(HZ/IGMP_TIMER_SCALE);
  if (!max_delay)
   max_delay = 1;
 } else {
  ...
 }
 rcu_read_lock();
 for_each_pmc_rcu(in_dev, im) {
  ...
  igmp_start_timer(im, max_delay);
 }
 rcu_read_unlock();
}
static void igmp_start_timer(struct ip_mc_list *im,       int max_delay) {
 int tv = net_random() % max_delay;
 im->tm_running = 1;
 if (!mod_timer(&im->timer, jiffies+tv+2))
  atomic_inc(&im->refcnt);
}
"""

# Linux dev_load, the worked identifier-abstraction example.
DEV_LOAD = """\
void dev_load (struct net* netw, const char* name) {
 struct net_device* dev;
 rcu_read_lock();
 dev = dev_get_by_name_rcu(netw , name);
 rcu_read_unlock();
 if (!dev && capable(CAP_NET_ADMIN))
  request_module("%s", name);
}
"""

DEV_LOAD_ABSTRACTED = (
    "void F_1 ( struct T_1 * V_1 , const char * V_2 ) { struct T_2 * V_3 ; "
    "F_2 ( ) ; V_3 = F_3 ( V_1 , V_2 ) ; F_4 ( ) ; "
    "if ( ! V_3 && F_5 ( V_4 ) ) F_6 ( L_1 , V_2 ) ; }"
)


@pytest.fixture
def igmp_pair() -> tuple[str, str]:
    return IGMP_VULN, IGMP_FIXED


@pytest.fixture
def dev_load_source() -> str:
    return DEV_LOAD
