#include <ros/ros.h>
#include <std_msgs/Int32.h>
#include <std_msgs/Float64.h>
#include <std_msgs/Empty.h>
#include <std_msgs/String.h>
#include <fictibot_msgs/BumperState.h>

class FictibotDriver {
public:
    FictibotDriver(ros::NodeHandle &n, bool diag_enabled) {
        bumper_pub_ = n.advertise<fictibot_msgs::BumperState>("bumper", 10);
        laser_pub_ = n.advertise<std_msgs::Int32>("laser", 10);
        if (diag_enabled) {
            diag_pub_ = n.advertise<std_msgs::String>("diagnostics", 1);
        }
        stop_sub_ = n.subscribe<std_msgs::Empty>("stop_cmd", 10,
                                                 &FictibotDriver::stopCallback, this);
        cmd_sub_ = n.subscribe<std_msgs::Float64>("cmd_vel", 10,
                                                  &FictibotDriver::commandCallback, this);
        calib_srv_ = n.advertiseService("calibrate", &FictibotDriver::calibrateCallback, this);
        n.param("max_speed", max_speed_, 0.5);
    }

    void stopCallback(const std_msgs::Empty::ConstPtr &msg) {
        halted_ = true;
    }

    void commandCallback(const std_msgs::Float64::ConstPtr &msg) {
        if (!halted_) {
            velocity_ = msg->data;
        }
    }

    bool calibrateCallback(void *req, void *res) {
        velocity_ = 0.0;
        return true;
    }

private:
    ros::Publisher bumper_pub_;
    ros::Publisher laser_pub_;
    ros::Publisher diag_pub_;
    ros::Subscriber stop_sub_;
    ros::Subscriber cmd_sub_;
    ros::ServiceServer calib_srv_;
    double max_speed_;
    double velocity_;
    bool halted_;
};

int main(int argc, char **argv) {
    ros::init(argc, argv, "fictibot_driver");
    ros::NodeHandle n;
    bool diag_enabled = argc > 1;
    FictibotDriver driver(n, diag_enabled);
    ros::spin();
    return 0;
}
